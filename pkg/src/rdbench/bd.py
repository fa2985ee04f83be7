"""Bjøntegaard-delta metrics between two rate-distortion curves.

Rates are in Mb/s and enter every fit as log10(rate).  Integration over the
common range is done in closed form on the fitted cubics.
"""

import math
from dataclasses import dataclass, field

import numpy as np

POLY = "cubic-poly"
PCHIP = "monotone-piecewise-cubic"
_INTERP_ALIASES = {"poly": POLY, "cubic": POLY, POLY: POLY, "pchip": PCHIP, PCHIP: PCHIP}

BD_RATE = "bd_rate_percent"
BD_METRIC = "bd_metric_delta"

MIN_POINTS = 4


class BDError(ValueError):
    """Curve data unusable for a BD computation."""


def interp_mode(name):
    try:
        return _INTERP_ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown interpolation mode {name!r} (use poly or pchip)") from None


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


@dataclass
class RDPoint:
    bitrate: float
    metrics: dict
    qp: int | None = None

    def __post_init__(self):
        if not self.bitrate > 0 or math.isinf(self.bitrate):
            raise BDError(f"bitrate must be positive and finite, got {self.bitrate}")
        for name, value in self.metrics.items():
            if value is None:
                continue
            if isinstance(value, str) or not math.isfinite(value):
                raise BDError(
                    f"metric {name}={value!r} at {self.bitrate} Mb/s is not finite; "
                    "lossless points cannot enter an RD curve"
                )

    def to_dict(self):
        return {"bitrate_mbps": self.bitrate, "qp": self.qp, "metrics": dict(sorted(self.metrics.items()))}

    @classmethod
    def from_dict(cls, d):
        metrics = {k: (float(v) if v not in (None, "inf") else (math.inf if v == "inf" else None))
                   for k, v in d.get("metrics", {}).items()}
        return cls(float(d["bitrate_mbps"]), metrics, d.get("qp"))


@dataclass
class RDCurve:
    label: str
    points: list = field(default_factory=list)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: p.bitrate)
        rates = [p.bitrate for p in self.points]
        for lo, hi in zip(rates, rates[1:]):
            if not hi > lo:
                raise BDError(f"curve {self.label!r}: duplicate bitrate {hi} Mb/s")

    def rates(self):
        return np.array([p.bitrate for p in self.points], np.float64)

    def values(self, metric):
        out = []
        for p in self.points:
            if p.metrics.get(metric) is None:
                raise BDError(f"curve {self.label!r}: metric {metric!r} missing at {p.bitrate} Mb/s")
            out.append(p.metrics[metric])
        return np.array(out, np.float64)

    def checked(self, metric):
        """(log10 rates, scores) after validating the BD preconditions."""
        if len(self.points) < MIN_POINTS:
            raise BDError(
                f"curve {self.label!r} has {len(self.points)} points; at least {MIN_POINTS} required"
            )
        y = self.values(metric)
        if np.any(np.diff(y) <= 0):
            raise BDError(f"curve {self.label!r}: {metric} does not increase strictly with bitrate")
        return np.log10(self.rates()), y

    def to_dict(self):
        return {"label": self.label, "points": [p.to_dict() for p in self.points]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["label"], [RDPoint.from_dict(p) for p in d["points"]])


# ---------------------------------------------------------------------------
# Interpolants
# ---------------------------------------------------------------------------


class CubicFit:
    """Least-squares cubic through all points.

    The fit runs on ``u = (x - centre) / scale`` for conditioning; quality
    values around 40 dB cubed would otherwise cost several digits.
    """

    mode = POLY

    def __init__(self, x, y):
        x = np.asarray(x, np.float64)
        y = np.asarray(y, np.float64)
        self.x = x
        self.centre = float(np.mean(x))
        self.scale = float(np.ptp(x)) / 2 or 1.0
        vander = np.vander((x - self.centre) / self.scale, 4, increasing=True)
        self._c, *_ = np.linalg.lstsq(vander, y, rcond=None)

    @property
    def coefficients(self):
        """Ascending power coefficients in the original variable."""
        shifted = np.polynomial.Polynomial(self._c).convert(domain=[-1, 1], window=[-1, 1])
        p = np.polynomial.Polynomial(shifted.coef)
        # substitute u = (x - centre) / scale
        u = np.polynomial.Polynomial([-self.centre / self.scale, 1 / self.scale])
        out = sum(c * u ** k for k, c in enumerate(p.coef))
        return np.pad(out.coef, (0, 4 - len(out.coef)))

    def __call__(self, t):
        c0, c1, c2, c3 = self._c
        u = (np.asarray(t, np.float64) - self.centre) / self.scale
        return ((c3 * u + c2) * u + c1) * u + c0

    def antiderivative(self, t):
        c0, c1, c2, c3 = self._c
        u = (np.asarray(t, np.float64) - self.centre) / self.scale
        return self.scale * ((((c3 / 4 * u + c2 / 3) * u + c1 / 2) * u + c0) * u)

    def integrate(self, a, b):
        return float(self.antiderivative(b) - self.antiderivative(a))


class MonotoneCubic:
    """Piecewise cubic Hermite interpolant with Fritsch-Butland slopes.

    Interior slopes are weighted harmonic means of the neighbouring secants
    (zero at local extrema); end slopes use the shape-preserving three-point
    formula.  The result never overshoots the data between knots.
    """

    mode = PCHIP

    def __init__(self, x, y):
        self.x = np.asarray(x, np.float64)
        self.y = np.asarray(y, np.float64)
        self.h = np.diff(self.x)
        self.slopes = self._slopes(self.h, np.diff(self.y) / self.h)
        seg = self._segment_integral(np.arange(len(self.h)), np.ones(len(self.h)))
        self._cumulative = np.concatenate([[0.0], np.cumsum(seg)])

    @staticmethod
    def _slopes(h, delta):
        n = len(h) + 1
        m = np.zeros(n)
        for k in range(1, n - 1):
            d0, d1 = delta[k - 1], delta[k]
            if d0 * d1 > 0:
                w1 = 2 * h[k] + h[k - 1]
                w2 = h[k] + 2 * h[k - 1]
                m[k] = (w1 + w2) / (w1 / d0 + w2 / d1)
        m[0] = MonotoneCubic._end_slope(h[0], h[1], delta[0], delta[1])
        m[-1] = MonotoneCubic._end_slope(h[-1], h[-2], delta[-1], delta[-2])
        return m

    @staticmethod
    def _end_slope(h0, h1, d0, d1):
        d = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
        if np.sign(d) != np.sign(d0):
            return 0.0
        if np.sign(d0) != np.sign(d1) and abs(d) > abs(3 * d0):
            return 3 * d0
        return d

    def _locate(self, t):
        k = np.searchsorted(self.x, t, side="right") - 1
        return np.clip(k, 0, len(self.h) - 1)

    def __call__(self, t):
        t = np.asarray(t, np.float64)
        k = self._locate(t)
        h = self.h[k]
        u = (t - self.x[k]) / h
        u2, u3 = u * u, u * u * u
        return (
            (2 * u3 - 3 * u2 + 1) * self.y[k]
            + (u3 - 2 * u2 + u) * h * self.slopes[k]
            + (-2 * u3 + 3 * u2) * self.y[k + 1]
            + (u3 - u2) * h * self.slopes[k + 1]
        )

    def _segment_integral(self, k, u):
        """Integral over [x_k, x_k + u*h_k] of segment k."""
        h = self.h[k]
        u2, u3, u4 = u * u, u ** 3, u ** 4
        return h * (
            (u - u3 + u4 / 2) * self.y[k]
            + (u2 / 2 - 2 * u3 / 3 + u4 / 4) * h * self.slopes[k]
            + (u3 - u4 / 2) * self.y[k + 1]
            + (u4 / 4 - u3 / 3) * h * self.slopes[k + 1]
        )

    def antiderivative(self, t):
        k = self._locate(t)
        u = (t - self.x[k]) / self.h[k]
        return self._cumulative[k] + self._segment_integral(k, u)

    def integrate(self, a, b):
        return float(self.antiderivative(b) - self.antiderivative(a))


def fit_interpolant(x, y, mode=PCHIP):
    x = np.asarray(x, np.float64)
    y = np.asarray(y, np.float64)
    if len(x) != len(y):
        raise BDError("x and y differ in length")
    if len(x) < MIN_POINTS:
        raise BDError(f"{len(x)} points given; at least {MIN_POINTS} required")
    if np.any(np.diff(x) <= 0):
        raise BDError("x must be strictly increasing (duplicate or unsorted abscissae)")
    mode = interp_mode(mode)
    return CubicFit(x, y) if mode == POLY else MonotoneCubic(x, y)


# ---------------------------------------------------------------------------
# BD computations
# ---------------------------------------------------------------------------


@dataclass
class BDResult:
    kind: str
    value: float
    overlap: tuple
    interp: str
    points_used: dict
    metric: str = ""
    anchor: str = ""
    test: str = ""
    interval: tuple | None = None

    def __post_init__(self):
        if not self.overlap[0] < self.overlap[1]:
            raise BDError(f"empty overlap {self.overlap}")
        if not math.isfinite(self.value):
            raise BDError("BD value is not finite")

    def to_dict(self):
        d = {
            "kind": self.kind,
            "value": self.value,
            "overlap": list(self.overlap),
            "interp": self.interp,
            "points_used": dict(self.points_used),
            "metric": self.metric,
            "anchor": self.anchor,
            "test": self.test,
        }
        if self.interval is not None:
            d["interval_mbps"] = list(self.interval)
        return d


@dataclass(frozen=True)
class InsufficientData:
    """Marker for a BD cell that cannot be computed (rendered as ``-``)."""

    reason: str = ""

    def to_dict(self):
        return {"kind": "insufficient_data", "reason": self.reason}

    def __str__(self):
        return "-"


def _mean_difference(fa, fb, lo, hi):
    return (fb.integrate(lo, hi) - fa.integrate(lo, hi)) / (hi - lo)


def bd_rate(anchor, test, metric="psnr_y", interp=PCHIP):
    """Average bitrate difference (%) of ``test`` vs ``anchor`` at equal quality.

    Negative values mean the test curve needs less rate.
    """
    interp = interp_mode(interp)
    ra, qa = anchor.checked(metric)
    rt, qt = test.checked(metric)
    lo, hi = max(qa[0], qt[0]), min(qa[-1], qt[-1])
    if not lo < hi:
        raise BDError(f"{metric} ranges of {anchor.label!r} and {test.label!r} do not overlap")
    fa = fit_interpolant(qa, ra, interp)
    ft = fit_interpolant(qt, rt, interp)
    d = _mean_difference(fa, ft, lo, hi)
    return BDResult(BD_RATE, (10.0 ** d - 1.0) * 100.0, (float(lo), float(hi)), interp,
                    {"anchor": len(ra), "test": len(rt)}, metric, anchor.label, test.label)


def bd_metric(anchor, test, metric="psnr_y", interp=PCHIP):
    """Average quality difference of ``test`` vs ``anchor`` at equal bitrate."""
    return _bd_metric(anchor, test, metric, interp, None)


def _bd_metric(anchor, test, metric, interp, log_bounds):
    interp = interp_mode(interp)
    ra, qa = anchor.checked(metric)
    rt, qt = test.checked(metric)
    lo, hi = max(ra[0], rt[0]), min(ra[-1], rt[-1])
    if log_bounds is not None:
        lo, hi = max(lo, log_bounds[0]), min(hi, log_bounds[1])
    if not lo < hi:
        raise BDError(f"rate ranges of {anchor.label!r} and {test.label!r} do not overlap")
    fa = fit_interpolant(ra, qa, interp)
    ft = fit_interpolant(rt, qt, interp)
    d = _mean_difference(fa, ft, lo, hi)
    return BDResult(BD_METRIC, float(d), (float(lo), float(hi)), interp,
                    {"anchor": len(ra), "test": len(rt)}, metric, anchor.label, test.label)


def parse_interval(text):
    """``"0:30"``, ``"30-80"``, ``"-30"``, ``"+80"`` -> (low, high) in Mb/s, None = open."""
    text = text.strip()
    if text.startswith("+"):
        return float(text[1:]), None
    if text.startswith("-"):
        return None, float(text[1:])
    sep = ":" if ":" in text else "-"
    low, _, high = text.partition(sep)
    lo = float(low) if low.strip() else None
    hi = float(high) if high.strip() else None
    return (lo if lo else None), hi


def interval_label(interval):
    lo, hi = interval
    if lo is None:
        return f"-{hi:g}"
    if hi is None:
        return f"+{lo:g}"
    return f"{lo:g}-{hi:g}"


def bd_metric_interval(anchor, test, metric, interval, interp=PCHIP, min_points=MIN_POINTS):
    """BD-metric restricted to a bitrate interval (Mb/s, ``None`` = open end).

    Both curves need at least ``min_points`` points inside the interval;
    otherwise an :class:`InsufficientData` marker is returned instead of
    raising.  The
    interpolants are fitted on every point of each curve and integrated over
    the common log-rate range clipped to the interval.
    """
    low, high = interval
    if low is not None and high is not None and not 0 < low < high:
        raise ValueError(f"invalid interval {interval}")
    for curve in (anchor, test):
        rates = curve.rates()
        inside = np.ones(len(rates), bool)
        if low is not None:
            inside &= rates >= low
        if high is not None:
            inside &= rates <= high
        if inside.sum() < min_points:
            return InsufficientData(
                f"{curve.label!r} has {int(inside.sum())} points in {interval_label(interval)} Mb/s"
            )
    bounds = (
        -math.inf if low is None else math.log10(low),
        math.inf if high is None else math.log10(high),
    )
    try:
        result = _bd_metric(anchor, test, metric, interp, bounds)
    except BDError as exc:
        if "overlap" in str(exc):
            return InsufficientData(str(exc))
        raise
    result.interval = (low, high)
    return result
