"""``rdbench`` command line.

Exit status: 0 success, 1 validation error (bad arguments, bad input files,
BD preconditions), 2 external tool failure.
"""

import argparse
import json
import logging
import os
import sys

from . import __version__
from .bd import BD_METRIC, BD_RATE, BDError, RDCurve, bd_metric, bd_metric_interval, bd_rate, parse_interval
from .codecs import MockCodec, Source, build_codec
from .mediaio import VideoSpec, parse_fps, write_video
from .metrics import AGGREGATION_MODES, MEAN_OF_FRAME_PSNR, format_db, score_sequence, si_ti
from .pipeline import (SR_QPS, CellFailure, ConfigError, build_experiment, prepare_sr_training_pairs,
                       sweep)
from .report import DEFAULT_INTERVALS, FORMATS, build_report, emit_curve_plotdata, load_curve
from .resample import Filter, resample_video
from .tools import ToolError, ToolTemplate

SUBCOMMANDS = ("resample", "metrics", "siti", "bd", "run", "sweep", "prepare-sr-data", "report")
EXIT_OK, EXIT_INVALID, EXIT_TOOL = 0, 1, 2


class UsageError(Exception):
    def __init__(self, message, usage):
        super().__init__(message)
        self.usage = usage


class Parser(argparse.ArgumentParser):
    """ArgumentParser that reports bad usage as exit status 1."""

    def error(self, message):
        raise UsageError(message, self.format_usage())


def _dims(text):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WIDTHxHEIGHT, got {text!r}") from None


def _qps(text):
    try:
        return [int(q) for q in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_raw_flags(p):
    g = p.add_argument_group("raw YUV input (ignored for .y4m)")
    g.add_argument("--width", type=int)
    g.add_argument("--height", type=int)
    g.add_argument("--bit-depth", type=int, default=8, choices=(8, 10))
    g.add_argument("--fps", default="60")


def _add_output_flags(p, default_format="text"):
    p.add_argument("--format", choices=FORMATS, default=default_format)
    p.add_argument("--out", help="write here instead of stdout")


def build_parser():
    parser = Parser(prog="rdbench", description="Rate-distortion benchmarking for multi-resolution delivery.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--json-errors", action="store_true", help="errors as one JSON line on stderr")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=Parser, metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("resample", help="resize a video with Lanczos or bicubic filtering")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--size", type=_dims, required=True, help="target WIDTHxHEIGHT")
    p.add_argument("--filter", default="lanczos:3", help="lanczos:A or bicubic:A (default lanczos:3)")
    p.add_argument("--no-antialias", action="store_true", help="do not widen the kernel when downscaling")
    _add_raw_flags(p)

    p = sub.add_parser("metrics", help="PSNR-Y and SSIM of a test video against a reference")
    p.add_argument("reference")
    p.add_argument("test")
    p.add_argument("--mode", choices=AGGREGATION_MODES, default=MEAN_OF_FRAME_PSNR)
    p.add_argument("--no-ssim", action="store_true")
    _add_raw_flags(p)
    _add_output_flags(p, "json")

    p = sub.add_parser("siti", help="spatial and temporal information of a video")
    p.add_argument("input")
    _add_raw_flags(p)
    _add_output_flags(p, "json")

    p = sub.add_parser("bd", help="Bjontegaard delta between two curve files")
    p.add_argument("--anchor", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--metric", default="psnr_y")
    p.add_argument("--kind", choices=("rate", "metric"), default="rate")
    p.add_argument("--interp", default="pchip", help="pchip (default) or poly")
    p.add_argument("--interval", help="bitrate interval for BD-metric, e.g. -30, 30-80, +80")

    for name, text in (("run", "run the experiments of a config file"),
                       ("sweep", "run every cell of a config file with a worker pool")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--workers", type=int)
        p.add_argument("--only", action="append", default=[], metavar="LABEL",
                       help="restrict to experiment labels (repeatable)")
        p.add_argument("--sequence", action="append", default=[], help="restrict to sequences (repeatable)")
        p.add_argument("--clean", action="store_true", help="purge cached artifacts first")

    p = sub.add_parser("prepare-sr-data", help="compressed LR / HR pairs for super-resolution training")
    p.add_argument("inputs", nargs="+", help="HR items (.y4m)")
    p.add_argument("--out", required=True)
    p.add_argument("--qps", type=_qps, default=list(SR_QPS))
    p.add_argument("--config", help="config file defining the codec (default: built-in mock codec)")
    p.add_argument("--codec", default="mock")

    p = sub.add_parser("report", help="BD tables and plot data from curve files")
    p.add_argument("curves", nargs="+", help="curve JSON files")
    p.add_argument("--anchor", help="anchor label (omit for plot data only)")
    p.add_argument("--tests", default="", help="comma-separated test labels")
    p.add_argument("--metrics", default="psnr_y,ssim,vmaf")
    p.add_argument("--plot-metric", default="psnr_y")
    p.add_argument("--intervals", default=",".join(DEFAULT_INTERVALS))
    p.add_argument("--interp", default="pchip")
    p.add_argument("--missing-as-zero", action="store_true",
                   help="average interval rows over all sequences, counting missing cells as 0")
    _add_output_flags(p)
    return parser


# ---------------------------------------------------------------------------


def _raw_spec(args, path):
    if path.lower().endswith(".y4m"):
        return None
    if not args.width or not args.height:
        raise ValueError(f"{path}: raw input needs --width and --height")
    num, den = parse_fps(args.fps)
    return VideoSpec(args.width, args.height, args.bit_depth, num, den)


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _table(rows, fmt):
    """rows: list of dicts with identical keys."""
    if fmt == "json":
        return _json(rows)
    keys = list(rows[0]) if rows else []
    sep = "," if fmt == "csv" else "\t"
    lines = [sep.join(keys)]
    lines += [sep.join("" if r[k] is None else str(r[k]) for k in keys) for r in rows]
    return "\n".join(lines) + "\n"


def cmd_resample(args):
    filt = Filter.parse(args.filter)
    src = Source(args.input, _raw_spec(args, args.input))
    with src.open() as reader:
        spec = write_video(resample_video(reader, args.size, filt, antialias=not args.no_antialias), args.output)
    print(f"wrote {spec.frame_count} frames {spec.width}x{spec.height} to {args.output}")


def cmd_metrics(args):
    ref = Source(args.reference, _raw_spec(args, args.reference))
    test = Source(args.test, _raw_spec(args, args.test))
    with ref.open() as r, test.open() as t:
        score = score_sequence(r, t, args.mode, ssim=not args.no_ssim)
    if args.format == "json":
        doc = {"aggregates": score.aggregates(), "per_frame": [f.to_dict() for f in score.per_frame]}
        _emit(_json(doc), args.out)
    else:
        _emit(_table([f.to_dict() for f in score.per_frame], args.format), args.out)


def cmd_siti(args):
    src = Source(args.input, _raw_spec(args, args.input))
    with src.open() as reader:
        res = si_ti(reader)
    if args.format == "json":
        _emit(_json(res.to_dict()), args.out)
    else:
        rows = [{"frame": i, "si": si, "ti": (None if i == 0 else res.per_frame_ti[i - 1])}
                for i, si in enumerate(res.per_frame_si)]
        _emit(_table(rows, args.format), args.out)


def _load(path):
    with open(path) as fh:
        doc = json.load(fh)
    try:
        return RDCurve.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: not a curve file ({exc})") from None


def cmd_bd(args):
    anchor, test = _load(args.anchor), _load(args.test)
    if args.interval:
        if args.kind != "metric":
            raise ValueError("--interval applies to --kind metric")
        result = bd_metric_interval(anchor, test, args.metric, parse_interval(args.interval), args.interp)
    elif args.kind == "rate":
        result = bd_rate(anchor, test, args.metric, args.interp)
    else:
        result = bd_metric(anchor, test, args.metric, args.interp)
    print(_json(result.to_dict()), end="")


def _select(configs, args):
    if args.only:
        configs = [c for c in configs if c.label in args.only]
    if args.sequence:
        configs = [c for c in configs if c.sequence in args.sequence]
    if not configs:
        raise ConfigError("no experiment matches the --only/--sequence filters")
    return configs


def cmd_sweep(args):
    configs, settings = build_experiment_file(args.config)
    configs = _select(configs, args)
    workers = args.workers or settings["workers"]
    if args.command == "run" and args.workers is None:
        workers = 1
    result = sweep(configs, workers=workers, clean=args.clean)
    for res in result.results:
        print(f"{res.config.sequence}/{res.config.label}: {len(res.curve.points)} points -> {res.curve_path}")
    print(f"{result.scheduled} cells, {result.invocations} tool invocations, {len(result.failures)} failed")
    if result.failures:
        for f in result.failures:
            print(f"FAILED {f}", file=sys.stderr)
        tool = any(isinstance(f.cause, ToolError) for f in result.failures)
        first = result.failures[0]
        if tool:
            first = next(f for f in result.failures if isinstance(f.cause, ToolError))
        raise first


def build_experiment_file(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return build_experiment(doc, os.path.dirname(os.path.abspath(path)))


def cmd_prepare_sr(args):
    codec = MockCodec()
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        tools = {n: ToolTemplate.from_config(n, c) for n, c in doc.get("tools", {}).items()}
        cfg = doc.get("codecs", {}).get(args.codec)
        if cfg is None and args.codec != "mock":
            raise ConfigError(f"codec {args.codec!r} not defined in {args.config}")
        if cfg is not None:
            codec = build_codec(args.codec, cfg, tools)
    manifest = prepare_sr_training_pairs(args.inputs, codec, args.qps, args.out)
    print(f"{len(manifest['pairs'])} pairs, {manifest['failed']} items failed -> "
          f"{os.path.join(args.out, 'sr_pairs.json')}")
    for f in manifest["failures"]:
        print(f"skipped {f['item']}: {f['error']}", file=sys.stderr)
    return EXIT_INVALID if manifest["failed"] else EXIT_OK


def cmd_report(args):
    by_seq = {}
    for path in args.curves:
        with open(path) as fh:
            doc = json.load(fh)
        curve = load_curve(path)
        seq = doc.get("sequence") or os.path.splitext(os.path.basename(path))[0]
        if curve.label in by_seq.setdefault(seq, {}):
            raise ValueError(f"duplicate curve {seq}/{curve.label}")
        by_seq[seq][curve.label] = curve
    metrics = [m for m in args.metrics.split(",") if m]
    if not args.anchor:
        curves = [c for s in by_seq for c in by_seq[s].values()]
        if len(by_seq) > 1:
            curves = [RDCurve(f"{s}:{lbl}", c.points) for s in by_seq for lbl, c in by_seq[s].items()]
        _emit(emit_curve_plotdata(curves, args.plot_metric, args.format), args.out)
        return
    bundle = build_report(by_seq, args.anchor, [t for t in args.tests.split(",") if t], metrics,
                          [i for i in args.intervals.split(",") if i], args.interp,
                          args.plot_metric, args.missing_as_zero)
    _emit(bundle.render(args.format), args.out)


COMMANDS = {
    "resample": cmd_resample,
    "metrics": cmd_metrics,
    "siti": cmd_siti,
    "bd": cmd_bd,
    "run": cmd_sweep,
    "sweep": cmd_sweep,
    "prepare-sr-data": cmd_prepare_sr,
    "report": cmd_report,
}


def _fail(kind, message, code, json_errors, **extra):
    if json_errors:
        payload = {"error": kind, "message": message.splitlines()[0] if message else "", "exit_code": code, **extra}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    else:
        print(f"rdbench: error: {message}", file=sys.stderr)
    return code


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    json_errors = "--json-errors" in argv
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        if not json_errors:
            sys.stderr.write(exc.usage)
        return _fail("usage", str(exc), EXIT_INVALID, json_errors)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code = COMMANDS[args.command](args)
    except CellFailure as exc:
        code = EXIT_TOOL if isinstance(exc.cause, ToolError) else EXIT_INVALID
        return _fail(type(exc.cause).__name__, str(exc), code, json_errors, cell=exc.cell_name)
    except ToolError as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_TOOL, json_errors)
    except (ValueError, OSError, BDError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_INVALID, json_errors)
    return code or EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
