"""Separable Lanczos / bicubic resampling of pixel planes and 4:2:0 frames.

Conventions: pixel-centre alignment ``src = (dst + 0.5) * (n_in / n_out) - 0.5``,
replicate (clamp) borders, per-output weights renormalised to sum to one,
float64 throughout and a single clip + round-half-up at the end.  When
shrinking, the kernel is stretched by the scale factor so it also acts as the
anti-alias low-pass.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .mediaio import FrameBuffer, MediaError, VideoSpec


@dataclass(frozen=True)
class Filter:
    kind: str = "lanczos"
    param: float = 3

    def __post_init__(self):
        if self.kind == "lanczos":
            if self.param < 1 or int(self.param) != self.param:
                raise ValueError(f"Lanczos taps parameter must be an integer >= 1, got {self.param}")
            object.__setattr__(self, "param", int(self.param))
        elif self.kind == "bicubic":
            if not -1.0 <= self.param <= 0.0:
                raise ValueError(f"bicubic coefficient must lie in [-1, 0], got {self.param}")
        else:
            raise ValueError(f"unknown filter kind {self.kind!r}")

    @classmethod
    def parse(cls, text):
        """``lanczos``, ``lanczos:2``, ``bicubic`` or ``bicubic:-0.75``."""
        kind, _, param = text.partition(":")
        kind = kind.strip().lower()
        if not param:
            return cls(kind, 3 if kind == "lanczos" else -0.5)
        return cls(kind, int(param) if kind == "lanczos" else float(param))

    @property
    def support(self):
        return self.param if self.kind == "lanczos" else 2

    def weights(self, x):
        if self.kind == "lanczos":
            return lanczos_kernel(x, self.param)
        return bicubic_kernel(x, self.param)

    def __str__(self):
        return f"{self.kind}:{self.param}"


LANCZOS3 = Filter("lanczos", 3)
BICUBIC = Filter("bicubic", -0.5)


def lanczos_kernel(x, a=3):
    x = np.asarray(x, np.float64)
    w = np.sinc(x) * np.sinc(x / a)
    w = np.where(np.abs(x) < a, w, 0.0)
    # sin(pi k) is not exactly zero in floating point
    w = np.where((x == np.round(x)) & (x != 0), 0.0, w)
    return np.where(x == 0, 1.0, w)


def bicubic_kernel(x, a=-0.5):
    ax = np.abs(np.asarray(x, np.float64))
    inner = ((a + 2) * ax - (a + 3)) * ax * ax + 1
    outer = ((a * ax - 5 * a) * ax + 8 * a) * ax - 4 * a
    return np.where(ax <= 1, inner, np.where(ax < 2, outer, 0.0))


def lanczos_weight(x, a=3):
    return float(lanczos_kernel(x, a))


def bicubic_weight(x, a=-0.5):
    return float(bicubic_kernel(x, a))


@dataclass(frozen=True)
class ResampleJob:
    source_dims: tuple
    target_dims: tuple
    filter: Filter = LANCZOS3
    boundary: str = "clamp"
    antialias: bool = True

    def __post_init__(self):
        for w, h in (self.source_dims, self.target_dims):
            if w <= 0 or h <= 0:
                raise ValueError(f"dimensions must be positive: {self.source_dims} -> {self.target_dims}")
        if self.boundary != "clamp":
            raise ValueError(f"unsupported boundary policy {self.boundary!r}")

    def scaled(self, fx, fy):
        """Same job on a plane subsampled by (fx, fy), e.g. 4:2:0 chroma."""
        (sw, sh), (tw, th) = self.source_dims, self.target_dims
        return ResampleJob((sw // fx, sh // fy), (tw // fx, th // fy), self.filter,
                           self.boundary, self.antialias)


def tap_table(n_in, n_out, filt, antialias=True):
    """Clamped source indices and normalised weights, both (n_out, taps)."""
    if n_out <= 0:
        raise ValueError("target dimension must be positive")
    scale = n_in / n_out
    stretch = max(scale, 1.0) if antialias else 1.0
    support = filt.support * stretch
    taps = int(math.ceil(2 * support)) + 1
    centre = (np.arange(n_out) + 0.5) * scale - 0.5
    first = np.floor(centre - support).astype(np.int64) + 1
    pos = first[:, None] + np.arange(taps)[None, :]
    w = filt.weights((pos - centre[:, None]) / stretch)
    w = w / w.sum(axis=1, keepdims=True)
    idx = np.clip(pos, 0, n_in - 1)
    return np.ascontiguousarray(idx), np.ascontiguousarray(w)


def resample_float(plane, job):
    """Horizontal then vertical pass; returns the unrounded float64 plane."""
    plane = np.asarray(plane)
    (sw, sh), (tw, th) = job.source_dims, job.target_dims
    if plane.shape != (sh, sw):
        raise MediaError(f"plane shape {plane.shape} does not match source dims {sw}x{sh}")
    ix, wx = tap_table(sw, tw, job.filter, job.antialias)
    iy, wy = tap_table(sh, th, job.filter, job.antialias)
    tmp = kernels.filter_rows(np.ascontiguousarray(plane, np.float64), ix, wx)
    return kernels.filter_cols(tmp, iy, wy)


def round_to_samples(values, max_value, dtype):
    return np.floor(np.clip(values, 0, max_value) + 0.5).astype(dtype)


def resample_plane(plane, job, bit_depth=None):
    plane = np.asarray(plane)
    if bit_depth is None:
        bit_depth = 8 if plane.dtype == np.uint8 else 10
    out = resample_float(plane, job)
    return round_to_samples(out, (1 << bit_depth) - 1, plane.dtype)


def resample_frame(frame, job):
    spec = frame.spec
    if job.source_dims != (spec.width, spec.height):
        raise MediaError(f"job source {job.source_dims} != frame {spec.width}x{spec.height}")
    tw, th = job.target_dims
    out_spec = VideoSpec(tw, th, spec.bit_depth, spec.fps_num, spec.fps_den, spec.frame_count)
    chroma_job = job.scaled(2, 2)
    planes = [resample_plane(frame.y, job, spec.bit_depth)]
    planes += [resample_plane(p, chroma_job, spec.bit_depth) for p in (frame.u, frame.v)]
    return FrameBuffer(*planes, out_spec)


def resample_video(frames, target_dims, filt=LANCZOS3, antialias=True):
    """Lazily resample a frame stream to ``target_dims`` (luma)."""
    tw, th = target_dims
    if tw % 2 or th % 2:
        raise MediaError(f"4:2:0 target dimensions must be even, got {tw}x{th}")
    job = None
    for frame in frames:
        if job is None:
            job = ResampleJob((frame.spec.width, frame.spec.height), (tw, th), filt,
                              antialias=antialias)
        yield resample_frame(frame, job)
