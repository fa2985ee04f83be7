import math

import numpy as np
import pytest

from conftest import random_frames
from rdbench.mediaio import FrameBuffer, MediaError, VideoSpec
from rdbench.metrics import (MEAN_OF_FRAME_PSNR, PSNR_OF_MEAN_MSE, format_db, gaussian_window, mse_to_psnr,
                             psnr_y, score_sequence, si_ti, sobel_magnitude, ssim_plane)


def frame(y, bit_depth=8):
    y = np.asarray(y)
    spec = VideoSpec(y.shape[1], y.shape[0], bit_depth)
    ch = spec.chroma_shape
    mid = 1 << (bit_depth - 1)
    return FrameBuffer(y.astype(spec.dtype), np.full(ch, mid, spec.dtype), np.full(ch, mid, spec.dtype), spec)


def ssim_windows(a, b, max_value):
    """Per-window SSIM with explicit weighted moments."""
    g = gaussian_window()
    w = np.outer(g, g)
    c1, c2 = (0.01 * max_value) ** 2, (0.03 * max_value) ** 2
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    vals = []
    for i in range(a.shape[0] - 10):
        for j in range(a.shape[1] - 10):
            x = a[i:i + 11, j:j + 11]
            y = b[i:i + 11, j:j + 11]
            mx, my = np.sum(w * x), np.sum(w * y)
            vx = np.sum(w * (x - mx) ** 2)
            vy = np.sum(w * (y - my) ** 2)
            cxy = np.sum(w * (x - mx) * (y - my))
            vals.append((2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


def test_psnr_closed_forms():
    zeros = frame(np.zeros((16, 16)))
    full = frame(np.full((16, 16), 255))
    assert psnr_y(zeros, full).psnr_y == pytest.approx(0.0, abs=1e-9)
    ones = frame(np.ones((16, 16)))
    assert psnr_y(zeros, ones).psnr_y == pytest.approx(20 * math.log10(255), abs=1e-9)
    assert psnr_y(zeros, zeros).psnr_y == math.inf


def test_psnr_ten_bit_peak():
    a = frame(np.zeros((8, 8)), 10)
    b = frame(np.ones((8, 8)), 10)
    assert psnr_y(a, b).psnr_y == pytest.approx(20 * math.log10(1023), abs=1e-9)


def test_infinite_psnr_serialised_as_string():
    assert format_db(math.inf) == "inf"
    assert format_db(31.5) == 31.5


def test_ssim_identity():
    rng = np.random.default_rng(1)
    x = rng.integers(0, 256, (16, 16))
    assert ssim_plane(x, x, 255) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_ssim_matches_window_oracle(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, (16, 16))
    b = np.clip(a + rng.integers(-40, 41, (16, 16)), 0, 255)
    assert ssim_plane(a, b, 255) == pytest.approx(ssim_windows(a, b, 255), abs=1e-9)


def test_ssim_uncorrelated_is_low():
    rng = np.random.default_rng(2)
    a = rng.integers(0, 256, (32, 32))
    b = rng.integers(0, 256, (32, 32))
    assert ssim_plane(a, b, 255) < 0.1


def test_ssim_small_plane_rejected():
    with pytest.raises(MediaError):
        ssim_plane(np.zeros((10, 20)), np.zeros((10, 20)), 255)


def test_sobel_step_edge_brute_force():
    p = np.zeros((8, 8))
    p[:, 4:] = 100
    mag = sobel_magnitude(p)
    kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]])
    ky = kx.T
    want = np.zeros((6, 6))
    for i in range(1, 7):
        for j in range(1, 7):
            win = p[i - 1:i + 2, j - 1:j + 2]
            want[i - 1, j - 1] = math.hypot(np.sum(kx * win), np.sum(ky * win))
    assert np.array_equal(mag, want)
    # the edge columns respond with 4 * 100
    assert set(np.unique(mag)) == {0.0, 400.0}
    si = si_ti([frame(p)]).si
    assert si == pytest.approx(float(np.std(want)), abs=1e-12)


def test_si_ti_zero_cases():
    flat = frame(np.full((16, 16), 90))
    res = si_ti([flat, flat, flat])
    assert res.si == 0.0
    assert res.ti == 0.0


def test_static_textured_video_ti_zero():
    f = random_frames(VideoSpec(16, 16), 1, seed=4)[0]
    res = si_ti([f] * 4)
    assert res.ti == 0.0 and res.si > 0


def test_single_frame_ti_unavailable():
    res = si_ti([frame(np.zeros((8, 8)))])
    assert res.ti is None and res.to_dict()["ti_available"] is False


def test_ti_of_uniform_change_is_zero_std():
    a = frame(np.full((8, 8), 10))
    b = frame(np.full((8, 8), 50))
    assert si_ti([a, b]).ti == 0.0


def test_ten_bit_normalised_to_eight():
    rng = np.random.default_rng(5)
    y8 = rng.integers(0, 256, (16, 16))
    r8 = si_ti([frame(y8)])
    r10 = si_ti([frame(y8 * 4, 10)])
    assert r10.si == pytest.approx(r8.si, abs=1e-12)


def test_sequence_aggregation_modes():
    a = frame(np.zeros((16, 16)))
    b1 = frame(np.ones((16, 16)))
    b2 = frame(np.full((16, 16), 2))
    s = score_sequence([a, a], [b1, b2], MEAN_OF_FRAME_PSNR, ssim=False)
    p1, p2 = mse_to_psnr(1, 255), mse_to_psnr(4, 255)
    assert s.psnr_y == pytest.approx((p1 + p2) / 2, abs=1e-12)
    s2 = score_sequence([a, a], [b1, b2], PSNR_OF_MEAN_MSE, ssim=False)
    assert s2.psnr_y == pytest.approx(mse_to_psnr(2.5, 255), abs=1e-12)


def test_sequence_length_mismatch():
    a = frame(np.zeros((16, 16)))
    with pytest.raises(MediaError):
        score_sequence([a, a], [a])


def test_geometry_mismatch():
    with pytest.raises(MediaError):
        psnr_y(frame(np.zeros((16, 16))), frame(np.zeros((16, 18))))
