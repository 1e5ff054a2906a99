"""HV3D: full-reference quality assessment for stereoscopic video.

Cyclopean-view quality (block matching, 3-D DCT fusion, CSF weighting,
block SSIM) combined with depth map quality (VIF and fovea-sized local
depth variance), plus temporal pooling, training and evaluation tools.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DisplayGeometry,
    FrameScore,
    MetricParams,
    fovea_block_size,
    hv3d_frame,
    hv3d_sequence,
    prepare_reference,
)
from .pooling import PoolingParams, correlation_stats, minkowski_pool  # noqa: E402
from .video_io import (  # noqa: E402
    DisparityMap,
    Frame,
    StereoSequence,
    VideoSequence,
    load_dataset_manifest,
    load_stereo_sequence,
    load_yuv_sequence,
)

__all__ = [
    "DisplayGeometry",
    "FrameScore",
    "MetricParams",
    "PoolingParams",
    "fovea_block_size",
    "hv3d_frame",
    "hv3d_sequence",
    "prepare_reference",
    "minkowski_pool",
    "correlation_stats",
    "DisparityMap",
    "Frame",
    "StereoSequence",
    "VideoSequence",
    "load_dataset_manifest",
    "load_stereo_sequence",
    "load_yuv_sequence",
]
