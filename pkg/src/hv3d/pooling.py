"""Temporal pooling, logistic mapping, correlation statistics and parameter training."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, stats

__all__ = [
    "PoolingParams",
    "EvalRecord",
    "FitResult",
    "ComponentRecord",
    "pooling_weights",
    "minkowski_pool",
    "logistic",
    "logistic_fit",
    "correlation_stats",
    "pearson",
    "recombine",
    "train_exponents",
    "train_pooling",
    "DEFAULT_P_GRID",
    "DEFAULT_TAU_GRID",
    "OUTLIER_RULE",
]

DEFAULT_P_GRID = tuple(range(1, 13))
DEFAULT_TAU_GRID = (10.0, 25.0, 50.0, 100.0, 200.0, 400.0)
OUTLIER_RULE = "|logistic(metric) - mos| > 2 * std(residuals, ddof=0)"


@dataclass(frozen=True)
class PoolingParams:
    p: float = 9.0
    tau: float = 100.0
    weight_mode: str = "normalized"
    recency_sign: str = "toward_last"

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("Minkowski exponent must be >= 1")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.weight_mode not in ("normalized", "literal"):
            raise ValueError(f"unknown weight mode {self.weight_mode!r}")
        if self.recency_sign not in ("toward_last", "as_printed"):
            raise ValueError(f"unknown recency sign {self.recency_sign!r}")


@dataclass(frozen=True)
class EvalRecord:
    id: str
    distortion: str
    metric_score: float
    mos: float

    def __post_init__(self):
        if not 0.0 <= self.mos <= 10.0:
            raise ValueError(f"mos {self.mos} outside [0, 10]")


@dataclass(frozen=True)
class FitResult:
    a: float
    b: float
    c: float
    pcc: float = float("nan")
    scc: float = float("nan")
    rmse: float = float("nan")
    outlier_ratio: float = float("nan")
    flags: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class ComponentRecord:
    """Per-frame HV3D components of one sequence plus its MOS."""

    id: str
    q: np.ndarray
    vif: np.ndarray
    var: np.ndarray
    mos: float
    distortion: str = ""


def pooling_weights(n: int, params: PoolingParams) -> np.ndarray:
    i = np.arange(1, n + 1, dtype=np.float64)
    s = 1.0 if params.recency_sign == "toward_last" else -1.0
    w = np.exp(s * (i - n) / params.tau)
    if params.weight_mode == "normalized":
        w = w / w.mean()
    return w


def minkowski_pool(scores: Sequence[float], params: PoolingParams = PoolingParams()) -> float:
    """Exponentially weighted Minkowski summation of per-frame scores."""
    x = np.asarray(scores, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot pool an empty score list")
    if np.any(x < 0):
        raise ValueError("scores must be >= 0")
    if params.weight_mode == "normalized" and np.all(x == x[0]):
        return float(x[0])
    w = pooling_weights(x.size, params)
    return float(np.mean(x ** params.p * w) ** (1.0 / params.p))


def logistic(x, a: float, b: float, c: float):
    z = np.clip(-b * (np.asarray(x, dtype=np.float64) - c), -700.0, 700.0)
    return a / (1.0 + np.exp(z))


def logistic_fit(metric: Sequence[float], mos: Sequence[float],
                 max_iter: int = 2000, tol: float = 1e-10) -> FitResult:
    """Least-squares fit of ``mos ~ a / (1 + exp(-b (metric - c)))``.

    Nelder-Mead from a fixed start: ``a = max(mos)``, ``c = median(metric)``,
    ``b = 4 / range(metric)``. Statistic fields of the result are unset.
    """
    x = np.asarray(metric, dtype=np.float64)
    y = np.asarray(mos, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("metric and mos lengths differ")
    if x.size < 4:
        raise ValueError("logistic fit needs at least 4 points")
    span = x.max() - x.min()
    if span == 0:
        raise ValueError("metric values are all equal; logistic fit is degenerate")
    x0 = np.array([y.max(), 4.0 / span, float(np.median(x))])

    def sse(theta):
        r = logistic(x, *theta) - y
        return float(r @ r)

    res = optimize.minimize(
        sse, x0, method="Nelder-Mead",
        options=dict(xatol=tol, fatol=np.inf, maxiter=max_iter, maxfev=10 * max_iter,
                     adaptive=False),
    )
    a, b, c = (float(v) for v in res.x)
    flags = () if res.success else ("fit_not_converged",)
    if np.ptp(y) == 0:
        flags += ("constant_mos",)
    return FitResult(a, b, c, flags=flags)


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx, dy = x - x.mean(), y - y.mean()
    den = np.sqrt((dx @ dx) * (dy @ dy))
    if den == 0:
        return float("nan")
    return float((dx @ dy) / den)


def correlation_stats(metric: Sequence[float], mos: Sequence[float]) -> FitResult:
    """PCC/RMSE/OR after logistic mapping, SCC on the raw metric.

    SCC uses average ranks for ties. Outliers are points whose residual
    exceeds twice the residual standard deviation.
    """
    x = np.asarray(metric, dtype=np.float64)
    y = np.asarray(mos, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"metric has {x.size} values, mos has {y.size}")
    if x.size < 3:
        raise ValueError("need at least 3 points")
    flags = []
    if x.size >= 4 and np.ptp(x) > 0:
        fit = logistic_fit(x, y)
        a, b, c = fit.a, fit.b, fit.c
        flags += list(fit.flags)
        mapped = logistic(x, a, b, c)
    else:
        # too few points or constant metric: fall back to a linear mapping
        flags.append("logistic_skipped")
        a = b = c = float("nan")
        if np.ptp(x) > 0:
            slope, icpt = np.polyfit(x, y, 1)
            mapped = slope * x + icpt
        else:
            mapped = np.full_like(y, y.mean())
    resid = mapped - y
    rmse = float(np.sqrt(np.mean(resid ** 2)))
    pcc = pearson(mapped, y)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        scc = float("nan")
        flags.append("undefined_correlation")
    else:
        scc = float(stats.spearmanr(x, y).statistic)
    if np.isnan(pcc) and "undefined_correlation" not in flags:
        flags.append("undefined_correlation")
    sd = resid.std()
    # residuals at rounding level carry no outliers
    tiny = 1e-12 * max(1.0, float(np.max(np.abs(y))))
    outliers = float(np.mean(np.abs(resid) > 2.0 * sd)) if sd > tiny else 0.0
    return FitResult(a, b, c, pcc, scc, rmse, outliers, tuple(flags))


def recombine(q, vif, var, beta1, beta2, beta3):
    q = np.maximum(np.asarray(q, dtype=np.float64), 0.0)
    vif = np.maximum(np.asarray(vif, dtype=np.float64), 0.0)
    return q ** beta1 * vif ** beta2 * np.asarray(var, dtype=np.float64) ** beta3


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(np.maximum(np.asarray(x, dtype=np.float64), 1e-300))


def _pcc_rows(pooled: np.ndarray, mos: np.ndarray) -> np.ndarray:
    """PCC of every row of ``pooled`` (grid x sequences) against ``mos``."""
    dp = pooled - pooled.mean(axis=1, keepdims=True)
    dm = mos - mos.mean()
    den = np.sqrt((dp * dp).sum(axis=1) * (dm @ dm))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (dp @ dm) / den
    return np.where(np.isfinite(r), r, -np.inf)


def _grid_values(lo: float, hi: float, step: float) -> np.ndarray:
    if step <= 0:
        raise ValueError("grid step must be > 0")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    if n < 1:
        raise ValueError("empty grid")
    return np.round(lo + step * np.arange(n), 10)


def _check_records(records, minimum=8):
    if len(records) < minimum:
        raise ValueError(f"training needs at least {minimum} records, got {len(records)}")
    mos = np.array([r.mos for r in records], dtype=np.float64)
    if np.ptp(mos) == 0:
        raise ValueError("all MOS values are identical; correlation is undefined")
    return mos


@dataclass(frozen=True)
class ExponentFit:
    beta1: float
    beta2: float
    beta3: float
    pcc: float
    evaluations: int


def train_exponents(records: Sequence[ComponentRecord], step: float = 0.01,
                    lo: float = 0.0, hi: float = 1.0,
                    pooling: PoolingParams = PoolingParams()) -> ExponentFit:
    """Exhaustive search for the exponents maximizing PCC of pooled HV3D vs MOS.

    Only the recombination is evaluated per grid point; exact ties resolve to
    the lexicographically smallest ``(beta1, beta2, beta3)``.
    """
    mos = _check_records(records)
    grid = _grid_values(lo, hi, step)
    # per-frame logs, stacked across sequences
    lq = np.concatenate([_log(r.q) for r in records])
    lv = np.concatenate([_log(r.vif) for r in records])
    ls = np.concatenate([_log(r.var) for r in records])
    seg = np.cumsum([0] + [len(r.q) for r in records])
    w = np.concatenate([pooling_weights(len(r.q), pooling) for r in records])
    counts = np.diff(seg).astype(np.float64)
    p = pooling.p
    b2, b3 = np.meshgrid(grid, grid, indexing="ij")
    b2, b3 = b2.ravel(), b3.ravel()
    chunk = max(1, 4_000_000 // max(len(lq), 1))
    best = (-np.inf, None)
    for b1 in grid:
        for start in range(0, len(b2), chunk):
            c2, c3 = b2[start:start + chunk], b3[start:start + chunk]
            logs = p * (np.outer(c2, lv) + np.outer(c3, ls) + b1 * lq)
            sums = np.add.reduceat(np.exp(logs) * w, seg[:-1], axis=1)
            pooled = (sums / counts) ** (1.0 / p)
            r = _pcc_rows(pooled, mos)
            j = int(np.argmax(r))
            if r[j] > best[0]:
                best = (r[j], (b1, c2[j], c3[j]))
    if best[1] is None:
        raise ValueError("no grid point gives a defined correlation")
    b1, b2_, b3_ = (float(v) for v in best[1])
    return ExponentFit(b1, b2_, b3_, float(best[0]), len(grid) ** 3)


@dataclass(frozen=True)
class PoolingFit:
    p: float
    tau: float
    pcc: float
    evaluations: int


def train_pooling(frame_scores: Sequence[Sequence[float]], mos: Sequence[float],
                  p_grid=DEFAULT_P_GRID, tau_grid=DEFAULT_TAU_GRID,
                  weight_mode: str = "normalized",
                  recency_sign: str = "toward_last") -> PoolingFit:
    """Grid search over ``(p, tau)`` maximizing PCC of pooled scores vs MOS."""
    if len(frame_scores) != len(mos):
        raise ValueError("one MOS value per sequence is required")
    if len(mos) < 8:
        raise ValueError(f"training needs at least 8 records, got {len(mos)}")
    mos = np.asarray(mos, dtype=np.float64)
    if np.ptp(mos) == 0:
        raise ValueError("all MOS values are identical; correlation is undefined")
    p_grid = sorted(float(p) for p in p_grid)
    tau_grid = sorted(float(t) for t in tau_grid)
    if not p_grid or not tau_grid:
        raise ValueError("empty pooling grid")
    best = (-np.inf, None)
    for p in p_grid:
        for tau in tau_grid:
            params = PoolingParams(p, tau, weight_mode, recency_sign)
            pooled = np.array([minkowski_pool(s, params) for s in frame_scores])
            r = _pcc_rows(pooled[None, :], mos)[0]
            if r > best[0]:
                best = (r, (p, tau))
    if best[1] is None:
        # every grid point is degenerate (e.g. identical pooled values)
        best = (float("nan"), (p_grid[0], tau_grid[0]))
    return PoolingFit(best[1][0], best[1][1], float(best[0]), len(p_grid) * len(tau_grid))
