import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from rdbench.bd import (PCHIP, POLY, BDError, CubicFit, InsufficientData, MonotoneCubic, RDCurve, RDPoint,
                        bd_metric, bd_metric_interval, bd_rate, fit_interpolant, interval_label,
                        parse_interval)

ANCHOR = [(10, 40), (20, 43), (40, 46), (80, 49)]
TEST = [(9, 40), (17, 43), (33, 46), (66, 49)]

# dense-trapezoid oracle values (10001 samples), frozen
GOLDEN = {
    PCHIP: {"rate": -15.658875863, "metric": 0.755677971, "interval_15_70": 0.801256423},
    POLY: {"rate": -15.658875863, "metric": 0.755665065, "interval_15_70": 0.801233209},
}


def curve(label, pts, metric="psnr_y"):
    return RDCurve(label, [RDPoint(r, {metric: q}) for r, q in pts])


@pytest.mark.parametrize("mode", [PCHIP, POLY])
def test_golden_example_pair(mode):
    a, t = curve("a", ANCHOR), curve("t", TEST)
    assert bd_rate(a, t, interp=mode).value == pytest.approx(GOLDEN[mode]["rate"], abs=0.05)
    assert bd_metric(a, t, interp=mode).value == pytest.approx(GOLDEN[mode]["metric"], abs=0.005)
    got = bd_metric_interval(a, t, "psnr_y", (15, 70), mode, min_points=2)
    assert got.value == pytest.approx(GOLDEN[mode]["interval_15_70"], abs=0.005)
    # tighter: closed form vs oracle
    assert bd_metric(a, t, interp=mode).value == pytest.approx(GOLDEN[mode]["metric"], abs=1e-6)


def test_interval_needs_four_points_per_curve():
    a, t = curve("a", ANCHOR), curve("t", TEST)
    res = bd_metric_interval(a, t, "psnr_y", (15, 70))
    assert isinstance(res, InsufficientData)
    assert str(res) == "-"


def test_interval_outside_data_is_marker():
    pts = [(5, 30), (10, 33), (15, 35), (25, 37)]
    a, t = curve("a", pts), curve("t", [(r * 1.1, q) for r, q in pts])
    assert isinstance(bd_metric_interval(a, t, "psnr_y", (30, 80)), InsufficientData)


def test_identical_curves_zero():
    a = curve("a", ANCHOR)
    assert bd_rate(a, a).value == 0.0
    assert bd_metric(a, a).value == 0.0
    assert bd_metric_interval(a, a, "psnr_y", (None, None)).value == 0.0


@pytest.mark.parametrize("mode", [PCHIP, POLY])
def test_double_rate_is_plus_100(mode):
    a = curve("a", ANCHOR)
    t = curve("t", [(2 * r, q) for r, q in ANCHOR])
    assert bd_rate(a, t, interp=mode).value == pytest.approx(100.0, abs=1e-6)


@pytest.mark.parametrize("mode", [PCHIP, POLY])
def test_constant_offset(mode):
    a = curve("a", ANCHOR)
    t = curve("t", [(r, q + 0.5) for r, q in ANCHOR])
    assert bd_metric(a, t, interp=mode).value == pytest.approx(0.5, abs=1e-9)


def test_infinite_psnr_rejected():
    with pytest.raises(BDError, match="lossless"):
        RDPoint(5.0, {"psnr_y": math.inf})


def test_too_few_points():
    a = curve("a", ANCHOR[:3])
    with pytest.raises(BDError, match="at least 4"):
        bd_rate(a, a)


def test_non_monotone_rejected():
    a = curve("a", [(10, 40), (20, 43), (40, 42), (80, 49)])
    with pytest.raises(BDError, match="strictly"):
        bd_rate(a, a)


def test_duplicate_bitrate_rejected():
    with pytest.raises(BDError, match="duplicate"):
        curve("a", [(10, 40), (10, 41), (40, 42), (80, 49)])


def test_disjoint_quality_ranges():
    a = curve("a", ANCHOR)
    t = curve("t", [(r, q + 20) for r, q in ANCHOR])
    with pytest.raises(BDError, match="overlap"):
        bd_rate(a, t)


def test_points_sorted_by_rate():
    c = curve("c", list(reversed(ANCHOR)))
    assert list(c.rates()) == [10, 20, 40, 80]


@pytest.mark.parametrize("mode", [PCHIP, POLY])
def test_collinear_points_reproduced(mode):
    x = np.array([0.0, 1.0, 2.5, 4.0])
    y = 3 * x - 1
    f = fit_interpolant(x, y, mode)
    mid = (x[:-1] + x[1:]) / 2
    assert np.max(np.abs(f(mid) - (3 * mid - 1))) < 1e-9


def test_cubic_exact_coefficients():
    x = np.array([-1.0, 0.5, 1.0, 2.0, 3.0])
    f = CubicFit(x, x ** 3)
    assert np.allclose(f.coefficients, [0, 0, 0, 1], atol=1e-9)


def test_monotone_matches_scipy():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = np.sort(rng.uniform(0, 3, 6))
        y = np.cumsum(rng.uniform(0.01, 2, 6))
        f = MonotoneCubic(x, y)
        ref = oracles.fit(x, y, "pchip")
        t = np.linspace(x[0], x[-1], 101)
        assert np.allclose(f(t), ref(t), atol=1e-12)
        assert f.integrate(x[0], x[-1]) == pytest.approx(float(ref.integrate(x[0], x[-1])), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 5), min_size=4, max_size=7), st.lists(st.floats(0.01, 5), min_size=4, max_size=7))
def test_monotone_no_overshoot(dx, dy):
    n = min(len(dx), len(dy))
    x = np.cumsum(dx[:n])
    y = np.cumsum(dy[:n])
    assume(np.all(np.diff(x) > 1e-6))
    f = MonotoneCubic(x, y)
    t = np.linspace(x[0], x[-1], 400)
    v = f(t)
    assert np.all(np.diff(v) >= -1e-9)
    mid = f((x[:-1] + x[1:]) / 2)
    assert np.all(mid >= y[:-1] - 1e-9) and np.all(mid <= y[1:] + 1e-9)


def _pair(seed):
    rng = np.random.default_rng(seed)
    (ra, qa), (rt, qt) = oracles.random_curve_pair(rng)
    return curve("a", zip(ra, qa)), curve("t", zip(rt, qt)), ((ra, qa), (rt, qt))


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("mode", [PCHIP, POLY])
def test_antisymmetry_and_invariances(seed, mode):
    a, t, _ = _pair(seed)
    try:
        ab = bd_rate(a, t, interp=mode).value
        ba = bd_rate(t, a, interp=mode).value
    except BDError:
        pytest.skip("no overlap for this draw")
    assert (1 + ab / 100) * (1 + ba / 100) == pytest.approx(1.0, abs=1e-6)
    assert bd_metric(a, t, interp=mode).value == pytest.approx(-bd_metric(t, a, interp=mode).value, abs=1e-9)
    k = 3.7
    ak = RDCurve("a", [RDPoint(p.bitrate * k, p.metrics) for p in a.points])
    tk = RDCurve("t", [RDPoint(p.bitrate * k, p.metrics) for p in t.points])
    assert bd_rate(ak, tk, interp=mode).value == pytest.approx(ab, abs=1e-9)
    shift = lambda c: RDCurve(c.label, [RDPoint(p.bitrate, {"psnr_y": p.metrics["psnr_y"] + 2.5})
                                         for p in c.points])
    assert bd_rate(shift(a), shift(t), interp=mode).value == pytest.approx(ab, abs=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_interval_full_overlap_equals_bd_metric(seed):
    a, t, _ = _pair(seed)
    try:
        full = bd_metric(a, t).value
    except BDError:
        pytest.skip("no overlap for this draw")
    res = bd_metric_interval(a, t, "psnr_y", (0.5, 1000))
    assert res.value == pytest.approx(full, abs=1e-9)


@pytest.mark.parametrize("text,expected", [("-30", (None, 30.0)), ("30-80", (30.0, 80.0)),
                                           ("+80", (80.0, None)), ("15:70", (15.0, 70.0))])
def test_parse_interval(text, expected):
    assert parse_interval(text) == expected
    assert parse_interval(interval_label(expected)) == expected


def test_invalid_interval():
    a = curve("a", ANCHOR)
    with pytest.raises(ValueError):
        bd_metric_interval(a, a, "psnr_y", (70, 15))


def test_curve_json_round_trip():
    c = RDCurve("x", [RDPoint(r, {"psnr_y": q, "ssim": q / 50}, qp=i) for i, (r, q) in enumerate(ANCHOR)])
    again = RDCurve.from_dict(c.to_dict())
    assert again.to_dict() == c.to_dict()


def test_result_records_overlap_and_mode():
    a, t = curve("a", ANCHOR), curve("t", TEST)
    r = bd_rate(a, t, interp="poly")
    assert r.interp == POLY
    assert r.overlap == (40.0, 49.0)
    assert r.points_used == {"anchor": 4, "test": 4}
