import pytest

from hv3d.core import DisplayGeometry, MetricParams, prepare_reference
from hv3d.synthetic import make_stereo_clip

_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def bundled_clip():
    """The 64-frame 320x192 synthetic stereo clip used by the property suites."""
    return make_stereo_clip(320, 192, 64, seed=0)


@pytest.fixture(scope="session")
def bundled_reference(bundled_clip):
    """Reference-side matches and depth variances, shared across distortions."""
    return prepare_reference(bundled_clip, DisplayGeometry(), MetricParams())


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        prev = _ACCEPTANCE.get(crit, True)
        _ACCEPTANCE[crit] = prev and report.outcome == "passed"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE):
        status = "PASS" if _ACCEPTANCE[crit] else "FAIL"
        terminalreporter.write_line(f"criterion {crit:2d}: {status}")
