"""Rate-distortion benchmarking for 8K/4K multi-resolution video delivery."""

__version__ = "0.1.0"

from ._accel import BACKEND  # noqa: E402
from .bd import (RDCurve, RDPoint, bd_metric, bd_metric_interval,  # noqa: E402
                 bd_rate)
from .mediaio import FrameBuffer, VideoReader, VideoSpec, write_video  # noqa: E402

__all__ = [
    "BACKEND", "FrameBuffer", "RDCurve", "RDPoint", "VideoReader", "VideoSpec",
    "bd_metric", "bd_metric_interval", "bd_rate", "write_video", "__version__",
]
