"""Acceptance suite: one test per criterion.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints one
``criterion N: PASS/FAIL`` line per test.  Running this file directly does the same.
"""

import json
import math
import os
import sys
import time

import numpy as np
import pytest

import oracles
from conftest import random_frames, textured_frames
from test_metrics import frame, ssim_windows
from test_report import REF_MATRIX, MATRIX_AVERAGE, matrix_cells, interval_cells
from test_resample import _bicubic, _lanczos, brute_force
from rdbench.bd import PCHIP, POLY, BDError, RDCurve, RDPoint, bd_metric, bd_metric_interval, bd_rate
from rdbench.codecs import LanczosUpscaler, MockCodec, Source
from rdbench.mediaio import VideoReader, VideoSpec, write_video
from rdbench.metrics import psnr_y, si_ti, ssim_plane
from rdbench.pipeline import PipelineConfig, Workspace, sweep
from rdbench.report import BDMatrix, build_report, emit_bd_matrix, interval_table, load_curve
from rdbench.resample import BICUBIC, LANCZOS3, ResampleJob, bicubic_weight, lanczos_weight, resample_plane
from rdbench.tools import derive_bitrate

criterion = pytest.mark.criterion


def _curve(label, rates, scores):
    return RDCurve(label, [RDPoint(float(r), {"psnr_y": float(q)}) for r, q in zip(rates, scores)])


@criterion(1, "BD oracle equivalence on 200 random curve pairs")
def test_bd_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    for mode, oracle_mode in ((PCHIP, "pchip"), (POLY, "poly")):
        checked = 0
        while checked < 200:
            anchor, test = oracles.random_curve_pair(rng)
            a, t = _curve("a", *anchor), _curve("t", *test)
            q_overlap = max(anchor[1][0], test[1][0]) < min(anchor[1][-1], test[1][-1])
            r_overlap = max(anchor[0][0], test[0][0]) < min(anchor[0][-1], test[0][-1])
            if not (q_overlap and r_overlap):
                # disjoint ranges: the calculator must refuse rather than extrapolate
                with pytest.raises(BDError):
                    bd_rate(a, t, interp=mode) if not q_overlap else bd_metric(a, t, interp=mode)
                continue
            rate = bd_rate(a, t, interp=mode).value
            assert math.log10(1 + rate / 100) == pytest.approx(
                oracles.rate_difference(anchor, test, oracle_mode), abs=1e-6)
            assert bd_metric(a, t, interp=mode).value == pytest.approx(
                oracles.metric_difference(anchor, test, oracle_mode), abs=1e-6)
            checked += 1
    assert time.perf_counter() - start < 10


@criterion(2, "BD closed forms")
def test_bd_closed_forms():
    rates = np.array([1.0, 2.5, 6.0, 15.0, 40.0])
    scores = np.array([30.0, 33.1, 36.0, 38.7, 41.2])
    for mode in (PCHIP, POLY):
        a = _curve("a", rates, scores)
        assert bd_rate(a, _curve("b", rates, scores), interp=mode).value == 0.0
        assert bd_metric(a, _curve("b", rates, scores), interp=mode).value == 0.0
        assert bd_rate(a, _curve("x2", rates * 2, scores), interp=mode).value == pytest.approx(100.0, abs=1e-6)
        assert bd_metric(a, _curve("up", rates, scores + 0.5), interp=mode).value == pytest.approx(0.5, abs=1e-9)


@criterion(3, "Average rows reconstructed from reference BD cells")
def test_average_row_reconstruction():
    m = BDMatrix(list(REF_MATRIX), ["psnr_y", "ssim", "vmaf"], matrix_cells())
    for metric, want in zip(m.metrics, MATRIX_AVERAGE):
        assert abs(m.averages[metric] - float(want)) <= 0.005
    assert emit_bd_matrix(matrix_cells(), out_format="csv").splitlines()[-1] == "Average," + ",".join(MATRIX_AVERAGE)
    t = interval_table(interval_cells(), methods=["Lanczos", "SRFBN"], metrics=["psnr_y", "ssim", "vmaf"])
    assert abs(t.averages[("-30", "SRFBN", "psnr_y")] - 0.77) <= 0.005
    assert abs(t.averages[("-30", "SRFBN", "ssim")] - 0.015) <= 0.0005
    assert abs(t.averages[("-30", "SRFBN", "vmaf")] - 7.97) <= 0.005


@criterion(4, "Resampler matches brute-force 2-D convolution")
def test_resampler_oracle():
    rng = np.random.default_rng(11)
    plane = rng.integers(0, 256, (64, 64)).astype(np.uint8)
    for filt, kernel in ((LANCZOS3, lambda x: _lanczos(x, 3)), (BICUBIC, lambda x: _bicubic(x, -0.5))):
        for target in ((32, 32), (128, 128), (48, 80)):
            got = resample_plane(plane, ResampleJob((64, 64), target, filt), 8)
            want = brute_force(plane, target, kernel, filt.support, 255)
            assert np.array_equal(got, want.astype(np.uint8))
            for value in (0, 128, 255):
                flat = np.full((64, 64), value, np.uint8)
                assert np.all(resample_plane(flat, ResampleJob((64, 64), target, filt), 8) == value)
    assert abs(lanczos_weight(0.5, 3) - 6 / math.pi ** 2) <= 1e-12
    assert abs(bicubic_weight(0.5, -0.5) - 0.5625) <= 1e-12


@criterion(5, "Metric oracles for PSNR, SSIM and SI/TI")
def test_metric_oracles():
    zero = frame(np.zeros((16, 16)))
    full = frame(np.full((16, 16), 255))
    one = frame(np.ones((16, 16)))
    assert abs(psnr_y(zero, full).psnr_y - 0.0) <= 1e-9
    assert abs(psnr_y(zero, one).psnr_y - 20 * math.log10(255)) <= 1e-9
    assert psnr_y(zero, zero).psnr_y == math.inf
    rng = np.random.default_rng(3)
    for _ in range(5):
        a = rng.integers(0, 256, (16, 16))
        b = np.clip(a + rng.integers(-30, 31, (16, 16)), 0, 255)
        assert abs(ssim_plane(a, a, 255) - 1.0) <= 1e-12
        assert abs(ssim_plane(a, b, 255) - ssim_windows(a, b, 255)) <= 1e-9
    flat = frame(np.full((16, 16), 80))
    res = si_ti([flat, flat])
    assert res.si == 0.0 and res.ti == 0.0
    still = random_frames(VideoSpec(32, 32), 1, seed=9)[0]
    assert si_ti([still] * 5).ti == 0.0


E2E_QPS = [17, 22, 27, 32, 37, 42]


def _e2e_configs(src, out):
    common = dict(qp_list=E2E_QPS, metrics=("psnr_y", "ssim"))
    return [PipelineConfig("simulcast", "synthetic", Source(src), MockCodec(), str(out), **common),
            PipelineConfig("prepost", "synthetic", Source(src), MockCodec(), str(out),
                           upscaler=LanczosUpscaler(), **common)]


@criterion(6, "End-to-end hermetic simulcast vs prepost run")
def test_end_to_end_hermetic(tmp_path):
    spec = VideoSpec(256, 128, 8, 60, 1)
    src = tmp_path / "synthetic.y4m"
    write_video(textured_frames(spec, 64, seed=1), src)
    start = time.perf_counter()
    res = sweep(_e2e_configs(str(src), tmp_path / "out"), workers=1)
    elapsed = time.perf_counter() - start
    assert res.ok and not res.failures
    sim, pre = res.results
    spec8 = spec.with_frames(64)
    spec4 = VideoSpec(128, 64, 8, 60, 1, 64)

    for r in (sim, pre):
        rates = [p.bitrate for p in r.curve.points]
        psnr = [p.metrics["psnr_y"] for p in r.curve.points]
        assert all(x < y for x, y in zip(rates, rates[1:]))
        assert all(x < y for x, y in zip(psnr, psnr[1:]))

    sim_by_qp = {m["cell"]["qp"]: m for m in sim.points}
    pre_by_qp = {m["cell"]["qp"]: m for m in pre.points}
    assert sorted(sim_by_qp) == sorted(pre_by_qp) == E2E_QPS
    root = str(tmp_path / "out")
    for qp in E2E_QPS:
        s, p = sim_by_qp[qp], pre_by_qp[qp]
        assert p["bitrate_mbps"] < s["bitrate_mbps"]
        streams = {st["role"]: st for st in s["streams"]}
        for role, file_key in (("low", "bitstream_low"), ("high", "bitstream_high")):
            assert streams[role]["bitstream_bytes"] == os.path.getsize(os.path.join(root, s["files"][file_key]["path"]))
        assert s["bitrate_mbps"] == (derive_bitrate(streams["low"]["bitstream_bytes"], spec4)
                                     + derive_bitrate(streams["high"]["bitstream_bytes"], spec8))
        (low,) = p["streams"]
        assert low["bitstream_bytes"] == os.path.getsize(os.path.join(root, p["files"]["bitstream_low"]["path"]))
        assert p["bitrate_mbps"] == derive_bitrate(low["bitstream_bytes"], spec4)
        # identical low-resolution encodes are shared between the two approaches
        assert low["bitstream_bytes"] == streams["low"]["bitstream_bytes"]

    full = bd_metric(sim.curve, pre.curve).value
    all_rates = [pt.bitrate for c in (sim.curve, pre.curve) for pt in c.points]
    union = (min(all_rates) * 0.5, max(all_rates) * 2)
    assert bd_metric_interval(sim.curve, pre.curve, "psnr_y", union).value == pytest.approx(full, abs=1e-9)
    assert elapsed < 60


@criterion(7, "Round-trip and determinism")
def test_round_trip_and_determinism(tmp_path):
    for bit_depth in (8, 10):
        frames = random_frames(VideoSpec(48, 32, bit_depth, 30, 1), 3, seed=bit_depth)
        for ext in ("y4m", "yuv"):
            path = tmp_path / f"rt{bit_depth}.{ext}"
            write_video(frames, path)
            kw = {} if ext == "y4m" else {"spec": frames[0].spec}
            with VideoReader(path, **kw) as r:
                assert list(r) == frames
            copy = tmp_path / f"rt{bit_depth}_copy.{ext}"
            with VideoReader(path, **kw) as r:
                write_video(list(r), copy)
            assert copy.read_bytes() == path.read_bytes()

    spec = VideoSpec(64, 32, 8, 60, 1)
    src = tmp_path / "seq.y4m"
    write_video(textured_frames(spec, 4, seed=5), src)
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        configs = _e2e_configs(str(src), out)
        ws = Workspace(out)
        run = sweep(configs, ws=ws)
        assert run.ok and run.invocations > 0
        resumed = sweep(configs, ws=Workspace(out))
        assert resumed.ok and resumed.invocations == 0
        curves = {r.config.label: r.curve_path for r in resumed.results}
        docs = {"synthetic": {label: load_curve(p) for label, p in curves.items()}}
        report = build_report(docs, "simulcast", ["prepost"], metrics=("psnr_y", "ssim"))
        outputs.append(({k: open(p, "rb").read() for k, p in curves.items()},
                        [report.render(f) for f in ("text", "csv", "json")]))
    assert outputs[0] == outputs[1]
    json.loads(outputs[0][1][2])


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
