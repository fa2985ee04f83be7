"""Full-reference luma metrics (PSNR-Y, SSIM) and SI/TI content descriptors."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .mediaio import MediaError

MEAN_OF_FRAME_PSNR = "mean-of-frame-psnr"
PSNR_OF_MEAN_MSE = "psnr-of-mean-mse"
AGGREGATION_MODES = (MEAN_OF_FRAME_PSNR, PSNR_OF_MEAN_MSE)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass
class FrameScore:
    index: int
    psnr_y: float
    mse_y: float
    ssim: float | None = None

    def to_dict(self):
        return {
            "index": self.index,
            "psnr_y": format_db(self.psnr_y),
            "ssim": self.ssim,
            "mse_y": self.mse_y,
        }


def format_db(value):
    """JSON-friendly dB value: +inf becomes the string ``"inf"``."""
    return "inf" if math.isinf(value) else value


def parse_db(value):
    return math.inf if value == "inf" else float(value)


def _check_pair(ref, test):
    if ref.spec.geometry() != test.spec.geometry():
        raise MediaError(f"spec mismatch: {ref.spec.geometry()} vs {test.spec.geometry()}")


def mse_to_psnr(mse, max_value):
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / mse)


def luma_mse(ref, test):
    _check_pair(ref, test)
    diff = ref.y.astype(np.int64) - test.y.astype(np.int64)
    return float(np.sum(diff * diff)) / diff.size


def psnr_y(ref, test):
    mse = luma_mse(ref, test)
    return FrameScore(index=0, psnr_y=mse_to_psnr(mse, ref.spec.max_value), mse_y=mse)


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def _valid_taps(n, g):
    n_out = n - len(g) + 1
    idx = np.arange(n_out)[:, None] + np.arange(len(g))[None, :]
    return idx, np.broadcast_to(g, idx.shape).copy()


def ssim_plane(a, b, max_value):
    """Mean SSIM over all fully-contained Gaussian windows (no padding)."""
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    h, w = a.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise MediaError(f"plane {w}x{h} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    g = gaussian_window()
    ix, wx = _valid_taps(w, g)
    iy, wy = _valid_taps(h, g)

    def blur(p):
        return kernels.filter_cols(kernels.filter_rows(p, ix, wx), iy, wy)

    c1 = (0.01 * max_value) ** 2
    c2 = (0.03 * max_value) ** 2
    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a * mu_a
    var_b = blur(b * b) - mu_b * mu_b
    cov = blur(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def ssim_y(ref, test):
    _check_pair(ref, test)
    return ssim_plane(ref.y, test.y, ref.spec.max_value)


@dataclass
class SequenceScore:
    per_frame: list
    max_value: int
    mode: str = MEAN_OF_FRAME_PSNR
    psnr_y_mean: float = field(init=False)
    psnr_y_of_mean_mse: float = field(init=False)
    ssim_mean: float | None = field(init=False)

    def __post_init__(self):
        if not self.per_frame:
            raise ValueError("a sequence score needs at least one frame")
        if self.mode not in AGGREGATION_MODES:
            raise ValueError(f"unknown aggregation mode {self.mode!r}")
        psnrs = [f.psnr_y for f in self.per_frame]
        self.psnr_y_mean = math.inf if any(map(math.isinf, psnrs)) else sum(psnrs) / len(psnrs)
        mean_mse = sum(f.mse_y for f in self.per_frame) / len(self.per_frame)
        self.psnr_y_of_mean_mse = mse_to_psnr(mean_mse, self.max_value)
        ssims = [f.ssim for f in self.per_frame]
        self.ssim_mean = None if None in ssims else sum(ssims) / len(ssims)

    @property
    def psnr_y(self):
        """Aggregate PSNR-Y according to ``mode``."""
        if self.mode == MEAN_OF_FRAME_PSNR:
            return self.psnr_y_mean
        return self.psnr_y_of_mean_mse

    def aggregates(self):
        return {
            "mode": self.mode,
            "psnr_y": format_db(self.psnr_y),
            "psnr_y_mean_of_frames": format_db(self.psnr_y_mean),
            "psnr_y_of_mean_mse": format_db(self.psnr_y_of_mean_mse),
            "ssim": self.ssim_mean,
            "frames": len(self.per_frame),
        }


def score_sequence(ref_frames, test_frames, mode=MEAN_OF_FRAME_PSNR, ssim=True):
    """Score two equally long frame streams frame by frame."""
    per_frame = []
    ref_iter, test_iter = iter(ref_frames), iter(test_frames)
    max_value = None
    index = 0
    while True:
        r = next(ref_iter, None)
        t = next(test_iter, None)
        if r is None and t is None:
            break
        if r is None or t is None:
            raise MediaError("reference and test streams differ in length")
        score = psnr_y(r, t)
        score.index = index
        if ssim:
            score.ssim = ssim_y(r, t)
        per_frame.append(score)
        max_value = r.spec.max_value
        index += 1
    if not per_frame:
        raise MediaError("cannot score empty streams")
    return SequenceScore(per_frame, max_value, mode)


def sobel_magnitude(luma):
    """Sobel gradient magnitude over interior pixels (border excluded)."""
    p = np.asarray(luma, np.float64)
    if p.shape[0] < 3 or p.shape[1] < 3:
        raise MediaError("SI needs at least a 3x3 plane")
    gx = (
        (p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:])
        - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])
    )
    gy = (
        (p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:])
        - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])
    )
    return np.sqrt(gx * gx + gy * gy)


def _luma8(frame):
    y = frame.y.astype(np.float64)
    if frame.spec.bit_depth == 10:
        y /= 4.0
    return y


@dataclass
class SiTiResult:
    per_frame_si: list
    per_frame_ti: list

    @property
    def si(self):
        return max(self.per_frame_si)

    @property
    def ti(self):
        """None when fewer than two frames were available."""
        return max(self.per_frame_ti) if self.per_frame_ti else None

    def to_dict(self):
        return {
            "si": self.si,
            "ti": self.ti,
            "ti_available": bool(self.per_frame_ti),
            "per_frame_si": self.per_frame_si,
            "per_frame_ti": self.per_frame_ti,
        }


def si_ti(frames):
    """Spatial and temporal information on 8-bit-scaled luma, max over time."""
    si, ti = [], []
    prev = None
    for frame in frames:
        y = _luma8(frame)
        si.append(float(np.std(sobel_magnitude(y))))
        if prev is not None:
            ti.append(float(np.std(y - prev)))
        prev = y
    if not si:
        raise MediaError("SI/TI needs at least one frame")
    return SiTiResult(si, ti)
