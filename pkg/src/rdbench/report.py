"""Tables and plot data: RD curves, BD matrices and per-interval BD tables.

Every renderer is a pure function of its inputs with stable ordering and
fixed decimal formatting, so rendering the same data twice yields the same
bytes.  CSV, text and JSON carry the same (rounded) numbers.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

from .bd import (BD_METRIC, BD_RATE, PCHIP, BDError, BDResult, InsufficientData, RDCurve,
                 bd_metric, bd_metric_interval, bd_rate, interval_label, parse_interval)

FORMATS = ("text", "csv", "json")
MISSING = "-"
DEFAULT_INTERVALS = ("-30", "30-80", "+80")
METRIC_NAMES = {"psnr_y": "PSNR-Y", "ssim": "SSIM", "vmaf": "VMAF"}
FOOTNOTE = "- : no result for this cell; excluded from the average"


class ReportError(ValueError):
    pass


def decimals_for(metric):
    """Two decimals, three for SSIM deltas."""
    return 3 if metric == "ssim" else 2


def cell_value(cell):
    """Float value of a BD cell, or None for a missing/insufficient one."""
    if cell is None or isinstance(cell, InsufficientData):
        return None
    if isinstance(cell, BDResult):
        return cell.value
    value = float(cell)
    return value if math.isfinite(value) else None


def fmt(value, decimals):
    if value is None:
        return MISSING
    text = f"{value:.{decimals}f}"
    # avoid "-0.00"
    if float(text) == 0:
        text = f"{0:.{decimals}f}"
    return text


def rounded(value, decimals):
    return None if value is None else float(fmt(value, decimals))


def mean_or_none(values, missing_as_zero=False):
    """Unweighted mean over present values.

    With ``missing_as_zero`` absent cells count as 0 and the divisor is the
    number of rows instead of the number of present cells.
    """
    present = [v for v in values if v is not None]
    if missing_as_zero:
        return sum(present) / len(values) if values else None
    return sum(present) / len(present) if present else None


def _render(header, rows, out_format, title=None, notes=()):
    """rows: lists of strings.  Returns text."""
    if out_format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    if out_format != "text":
        raise ReportError(f"unknown format {out_format!r}; use one of {FORMATS}")
    table = [header, *rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = []
    if title:
        lines.append(title)
    for k, r in enumerate(table):
        cells = [r[0].ljust(widths[0])] + [c.rjust(wd) for c, wd in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if k == 0:
            lines.append("  ".join("-" * wd for wd in widths))
    lines.extend(notes)
    return "\n".join(lines) + "\n"


def _json(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# RD curve plot data
# ---------------------------------------------------------------------------


def curve_plotdata(curves, metric):
    """(labels, rows) with rows = (bitrate, [value or None per curve]) sorted by rate."""
    if not curves:
        raise ReportError("no curves to plot")
    # rates equal to a millibit per second share a row (float sums differ in the last bits)
    table, shown = {}, {}
    for i, curve in enumerate(curves):
        for p in curve.points:
            if p.metrics.get(metric) is None:
                raise ReportError(f"curve {curve.label!r} has no {metric!r} at {p.bitrate} Mb/s")
            key = round(p.bitrate, 9)
            shown.setdefault(key, p.bitrate)
            table.setdefault(key, [None] * len(curves))[i] = p.metrics[metric]
    return [c.label for c in curves], [(shown[k], table[k]) for k in sorted(table)]


def emit_curve_plotdata(curves, metric, out_format="text"):
    """Columnar plot data: bitrate_mbps plus one column per curve; gaps are ``-`` (text) or empty (CSV)."""
    labels, rows = curve_plotdata(curves, metric)
    if out_format == "json":
        return _json({
            "metric": metric,
            "columns": ["bitrate_mbps", *labels],
            "rows": [[rate, *vals] for rate, vals in rows],
        })
    gap = "" if out_format == "csv" else MISSING
    body = [[f"{rate:.6f}", *(gap if v is None else f"{v:.6f}" for v in vals)] for rate, vals in rows]
    if out_format == "text":
        # whitespace-separated, gnuplot style
        header = "# bitrate_mbps " + " ".join(_token(label) for label in labels)
        return "\n".join([header, *(" ".join(r) for r in body)]) + "\n"
    return _render(["bitrate_mbps", *labels], body, out_format)


def _token(label):
    return "_".join(label.split()) or "_"


# ---------------------------------------------------------------------------
# BD matrix (sequences x metrics)
# ---------------------------------------------------------------------------


def build_bd_matrix(pairs, metrics, kind=BD_RATE, interp=PCHIP):
    """``pairs``: {sequence: (anchor curve, test curve)} -> {(sequence, metric): cell}.

    A cell that cannot be computed becomes an :class:`InsufficientData` marker.
    """
    fn = bd_rate if kind == BD_RATE else bd_metric
    out = {}
    for seq, (anchor, test) in pairs.items():
        for metric in metrics:
            try:
                out[(seq, metric)] = fn(anchor, test, metric, interp)
            except BDError as exc:
                out[(seq, metric)] = InsufficientData(str(exc))
    return out


def _ordered(keys, preferred=()):
    seen = list(dict.fromkeys(keys))
    first = [k for k in preferred if k in seen]
    return first + [k for k in seen if k not in first]


@dataclass
class BDMatrix:
    sequences: list
    metrics: list
    cells: dict
    averages: dict = field(default_factory=dict)
    anchor_label: str = ""
    test_label: str = ""
    kind: str = BD_RATE

    def __post_init__(self):
        self.averages = {
            m: mean_or_none([cell_value(self.cells.get((s, m))) for s in self.sequences])
            for m in self.metrics
        }

    def decimals(self, metric):
        return 2 if self.kind == BD_RATE else decimals_for(metric)

    def has_missing(self):
        return any(cell_value(self.cells.get((s, m))) is None
                   for s in self.sequences for m in self.metrics)

    def rows(self):
        out = []
        for s in self.sequences:
            out.append([s, *(fmt(cell_value(self.cells.get((s, m))), self.decimals(m)) for m in self.metrics)])
        out.append(["Average", *(fmt(self.averages[m], self.decimals(m)) for m in self.metrics)])
        return out

    def to_dict(self):
        return {
            "anchor": self.anchor_label,
            "test": self.test_label,
            "kind": self.kind,
            "metrics": list(self.metrics),
            "rows": {s: {m: rounded(cell_value(self.cells.get((s, m))), self.decimals(m))
                         for m in self.metrics} for s in self.sequences},
            "average": {m: rounded(self.averages[m], self.decimals(m)) for m in self.metrics},
        }


def bd_matrix(results, anchor_label="", test_label="", kind=BD_RATE, sequences=None, metrics=None):
    seqs = sequences or _ordered(s for s, _ in results)
    mets = metrics or _ordered((m for _, m in results), METRIC_NAMES)
    return BDMatrix(list(seqs), list(mets), dict(results), anchor_label=anchor_label,
                    test_label=test_label, kind=kind)


def emit_bd_matrix(results, anchor_label="", test_label="", out_format="text", kind=BD_RATE,
                   sequences=None, metrics=None):
    """Rows = sequences, columns = metrics, final Average row (mean of present cells)."""
    m = results if isinstance(results, BDMatrix) else bd_matrix(
        results, anchor_label, test_label, kind, sequences, metrics)
    if out_format == "json":
        return _json(m.to_dict())
    unit = "BD-rate (%)" if m.kind == BD_RATE else "BD-metric"
    title = f"{unit}: {m.test_label} vs {m.anchor_label}" if m.anchor_label or m.test_label else unit
    header = ["Sequence", *(METRIC_NAMES.get(x, x) for x in m.metrics)]
    notes = [FOOTNOTE] if m.has_missing() else []
    return _render(header, m.rows(), out_format, title=title if out_format == "text" else None,
                   notes=notes if out_format == "text" else ())


# ---------------------------------------------------------------------------
# Interval table (sequence x interval rows, method x metric columns)
# ---------------------------------------------------------------------------


def build_interval_table(pairs, metrics, intervals=DEFAULT_INTERVALS, interp=PCHIP):
    """``pairs``: {sequence: {method: (anchor, test)}} -> {(seq, interval, method, metric): cell}."""
    out = {}
    for seq, methods in pairs.items():
        for method, (anchor, test) in methods.items():
            for text in intervals:
                label = interval_label(parse_interval(text))
                for metric in metrics:
                    try:
                        out[(seq, label, method, metric)] = bd_metric_interval(
                            anchor, test, metric, parse_interval(text), interp)
                    except BDError as exc:
                        out[(seq, label, method, metric)] = InsufficientData(str(exc))
    return out


@dataclass
class IntervalTable:
    sequences: list
    intervals: list
    methods: list
    metrics: list
    cells: dict
    missing_as_zero: bool = False
    averages: dict = field(default_factory=dict)

    def __post_init__(self):
        self.intervals = [interval_label(parse_interval(i)) for i in self.intervals]
        self.averages = {
            (i, meth, met): mean_or_none(
                [cell_value(self.cells.get((s, i, meth, met))) for s in self.sequences],
                self.missing_as_zero,
            )
            for i in self.intervals for meth in self.methods for met in self.metrics
        }

    def columns(self):
        return [(meth, met) for meth in self.methods for met in self.metrics]

    def _row(self, name, interval, getter):
        return [name, interval, *(fmt(getter(meth, met), decimals_for(met)) for meth, met in self.columns())]

    def rows(self):
        out = []
        for s in self.sequences:
            for i in self.intervals:
                out.append(self._row(s, i, lambda meth, met: cell_value(self.cells.get((s, i, meth, met)))))
        for i in self.intervals:
            out.append(self._row("Average", i, lambda meth, met: self.averages[(i, meth, met)]))
        return out

    def has_missing(self):
        return any(cell_value(self.cells.get((s, i, meth, met))) is None
                   for s in self.sequences for i in self.intervals for meth, met in self.columns())

    def to_dict(self):
        body = {}
        for i in self.intervals:
            for s in self.sequences:
                for meth, met in self.columns():
                    v = cell_value(self.cells.get((s, i, meth, met)))
                    body.setdefault(i, {}).setdefault(s, {}).setdefault(meth, {})[met] = rounded(v, decimals_for(met))
        avg = {}
        for (i, meth, met), v in self.averages.items():
            avg.setdefault(i, {}).setdefault(meth, {})[met] = rounded(v, decimals_for(met))
        return {"intervals": self.intervals, "methods": self.methods, "metrics": self.metrics,
                "missing_as_zero": self.missing_as_zero, "rows": body, "average": avg}


def interval_table(results, intervals=DEFAULT_INTERVALS, sequences=None, methods=None, metrics=None,
                   missing_as_zero=False):
    return IntervalTable(
        list(sequences or _ordered(k[0] for k in results)),
        list(intervals),
        list(methods or _ordered(k[2] for k in results)),
        list(metrics or _ordered((k[3] for k in results), METRIC_NAMES)),
        dict(results),
        missing_as_zero,
    )


def emit_interval_table(results, out_format="text", intervals=DEFAULT_INTERVALS, missing_as_zero=False,
                        sequences=None, methods=None, metrics=None):
    """Per sequence and bitrate interval (Mb/s): BD-metric columns for each method."""
    t = results if isinstance(results, IntervalTable) else interval_table(
        results, intervals, sequences, methods, metrics, missing_as_zero)
    if out_format == "json":
        return _json(t.to_dict())
    header = ["Sequence", "Interval",
              *(f"{meth} BD-{METRIC_NAMES.get(met, met).replace('-Y', '')}" for meth, met in t.columns())]
    notes = [FOOTNOTE] if t.has_missing() else []
    title = "BD-metric per bitrate interval (Mb/s)" if out_format == "text" else None
    return _render(header, t.rows(), out_format, title=title, notes=notes if out_format == "text" else ())


# ---------------------------------------------------------------------------
# Bundles
# ---------------------------------------------------------------------------


@dataclass
class ReportBundle:
    curves: list = field(default_factory=list)
    bd_matrix: BDMatrix | None = None
    interval_table: IntervalTable | None = None
    metric: str = "psnr_y"

    @property
    def averages(self):
        out = {}
        if self.bd_matrix is not None:
            out["bd_matrix"] = dict(self.bd_matrix.averages)
        if self.interval_table is not None:
            out["interval_table"] = {"/".join(k): v for k, v in self.interval_table.averages.items()}
        return out

    def render(self, out_format="text"):
        if out_format == "json":
            doc = {"curves": [c.to_dict() for c in self.curves]}
            if self.bd_matrix is not None:
                doc["bd_matrix"] = self.bd_matrix.to_dict()
            if self.interval_table is not None:
                doc["interval_table"] = self.interval_table.to_dict()
            return _json(doc)
        parts = []
        if self.curves:
            parts.append(emit_curve_plotdata(self.curves, self.metric, out_format))
        if self.bd_matrix is not None:
            parts.append(emit_bd_matrix(self.bd_matrix, out_format=out_format))
        if self.interval_table is not None:
            parts.append(emit_interval_table(self.interval_table, out_format))
        return "\n".join(parts)


def load_curve(path):
    with open(path) as fh:
        doc = json.load(fh)
    try:
        return RDCurve.from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise ReportError(f"{path}: not a curve file ({exc})") from None


def build_report(curve_docs, anchor, tests, metrics=("psnr_y", "ssim", "vmaf"), intervals=DEFAULT_INTERVALS,
                 interp=PCHIP, plot_metric="psnr_y", missing_as_zero=False):
    """Assemble a bundle from curves grouped by sequence.

    ``curve_docs``: {sequence: {label: RDCurve}}.  The BD matrix compares the
    first of ``tests`` against ``anchor`` (BD-rate); the interval table lists
    every test label as a method (BD-metric).
    """
    if not tests:
        raise ReportError("need at least one test label")
    for seq, by_label in curve_docs.items():
        for label in (anchor, *tests):
            if label not in by_label:
                raise ReportError(f"sequence {seq!r} has no curve labelled {label!r}")
    seqs = list(curve_docs)
    present = [m for m in metrics if all(
        all(p.metrics.get(m) is not None for p in c.points) for d in curve_docs.values() for c in d.values())]
    if not present:
        raise ReportError(f"none of the metrics {list(metrics)} is present in every curve")
    matrix_pairs = {s: (curve_docs[s][anchor], curve_docs[s][tests[0]]) for s in seqs}
    matrix = bd_matrix(build_bd_matrix(matrix_pairs, present, BD_RATE, interp), anchor, tests[0],
                       BD_RATE, seqs, present)
    table_pairs = {s: {t: (curve_docs[s][anchor], curve_docs[s][t]) for t in tests} for s in seqs}
    table = interval_table(build_interval_table(table_pairs, present, intervals, interp), intervals,
                           seqs, list(tests), present, missing_as_zero)
    curves = [c for s in seqs for c in _relabel(s, curve_docs[s], len(seqs) > 1)]
    return ReportBundle(curves, matrix, table, plot_metric if plot_metric in present else present[0])


def _relabel(seq, by_label, prefix):
    for label in sorted(by_label):
        curve = by_label[label]
        yield RDCurve(f"{seq}:{label}", curve.points) if prefix else curve


__all__ = [
    "BD_METRIC", "BD_RATE", "BDMatrix", "IntervalTable", "ReportBundle", "ReportError",
    "build_bd_matrix", "build_interval_table", "build_report", "emit_bd_matrix",
    "emit_curve_plotdata", "emit_interval_table", "load_curve", "mean_or_none",
]
