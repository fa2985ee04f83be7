"""External tool adapters: argv templates, process execution, bitrate and VMAF.

Reference encoders, decoders, super-resolution upscalers and the VMAF tool are
all driven through :class:`ToolTemplate`; nothing is auto-discovered.
"""

import json
import logging
import os
import re
import shlex
import shutil
import string
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction

logger = logging.getLogger(__name__)

TOOL_DIR_ENV = "RDBENCH_TOOL_DIR"
DEFAULT_TIMEOUT = 24 * 3600
LOG_TAIL_LINES = 20

PLACEHOLDERS = frozenset(
    {"input", "output", "qp", "width", "height", "fps", "frames",
     "bit_depth", "recon", "ref", "dist", "workdir"}
)
# bindings that name files; made absolute before substitution
PATH_PLACEHOLDERS = frozenset({"input", "output", "recon", "ref", "dist", "workdir"})


class ToolError(RuntimeError):
    """An external tool could not be run or did not deliver its outputs."""

    def __init__(self, message, log_tail=""):
        super().__init__(message + (f"\n--- log tail ---\n{log_tail}" if log_tail else ""))
        self.log_tail = log_tail


class ToolNotFound(ToolError):
    pass


class ToolTimeout(ToolError):
    pass


class TemplateError(ValueError):
    pass


def template_fields(text):
    names = []
    for _, name, spec, conv in string.Formatter().parse(text):
        if name is None:
            continue
        if not name or not name.isidentifier():
            raise TemplateError(f"malformed placeholder {{{name}}} in {text!r}")
        names.append(name)
    return names


@dataclass
class ToolTemplate:
    name: str
    executable: str
    args: str = ""
    expected_outputs: list = field(default_factory=list)
    timeout: float = DEFAULT_TIMEOUT
    workdir: str | None = None

    def __post_init__(self):
        for text in [self.args, *self.expected_outputs]:
            for name in template_fields(text):
                if name not in PLACEHOLDERS:
                    raise TemplateError(
                        f"tool {self.name!r}: unknown placeholder {{{name}}}; "
                        f"allowed: {', '.join(sorted(PLACEHOLDERS))}"
                    )

    @classmethod
    def from_config(cls, name, cfg):
        args = cfg.get("args", "")
        if isinstance(args, list):
            args = " ".join(shlex.quote(a) if "{" not in a else a for a in args)
        return cls(
            name=name,
            executable=cfg["executable"],
            args=args,
            expected_outputs=list(cfg.get("expected_outputs", [])),
            timeout=float(cfg.get("timeout_s", DEFAULT_TIMEOUT)),
            workdir=cfg.get("workdir"),
        )

    def placeholders(self):
        return set(template_fields(self.args))

    def bind(self, bindings):
        """argv (without the executable) with every placeholder substituted."""
        values = _normalise(bindings)
        missing = self.placeholders() - values.keys()
        if missing:
            raise TemplateError(f"tool {self.name!r}: unbound placeholders {sorted(missing)}")
        return [tok.format(**values) for tok in shlex.split(self.args)]

    def outputs(self, bindings):
        values = _normalise(bindings)
        return [os.path.abspath(p.format(**values)) for p in self.expected_outputs]

    def fingerprint(self):
        return {"executable": self.executable, "args": self.args}


def _normalise(bindings):
    out = {}
    for key, value in bindings.items():
        if key in PATH_PLACEHOLDERS and value is not None:
            value = os.path.abspath(os.fspath(value))
        out[key] = value
    return out


def resolve_executable(exe):
    if os.path.isabs(exe):
        if os.path.isfile(exe) and os.access(exe, os.X_OK):
            return exe
        raise ToolNotFound(f"executable {exe} not found or not executable")
    tool_dir = os.environ.get(TOOL_DIR_ENV)
    if tool_dir:
        candidate = os.path.join(tool_dir, exe)
        if os.path.isfile(candidate) and os.access(candidate, os.X_OK):
            return os.path.abspath(candidate)
    found = shutil.which(exe)
    if found is None:
        raise ToolNotFound(f"executable {exe!r} not found (searched ${TOOL_DIR_ENV} and PATH)")
    return found


@dataclass
class ToolRun:
    argv: list
    returncode: int
    wall_time: float
    log_path: str
    outputs: list

    def log(self):
        with open(self.log_path, errors="replace") as fh:
            return fh.read()


def _tail(path, n=LOG_TAIL_LINES):
    try:
        with open(path, errors="replace") as fh:
            return "".join(fh.readlines()[-n:])
    except OSError:
        return ""


def run_tool(template, bindings, log_path=None, cwd=None):
    """Run ``template`` with ``bindings``; stdout and stderr go to ``log_path``."""
    exe = resolve_executable(template.executable)
    argv = [exe, *template.bind(bindings)]
    cwd = os.path.abspath(cwd or template.workdir or os.getcwd())
    os.makedirs(cwd, exist_ok=True)
    if log_path is None:
        fd, log_path = tempfile.mkstemp(prefix=f"{template.name}-", suffix=".log", dir=cwd)
        os.close(fd)
    log_path = os.path.abspath(log_path)
    logger.debug("running %s", shlex.join(argv))
    start = time.perf_counter()
    with open(log_path, "wb") as log:
        try:
            proc = subprocess.run(argv, cwd=cwd, stdout=log, stderr=subprocess.STDOUT,
                                  stdin=subprocess.DEVNULL, timeout=template.timeout)
        except subprocess.TimeoutExpired:
            raise ToolTimeout(
                f"tool {template.name!r} exceeded {template.timeout:g}s and was terminated",
                _tail(log_path),
            ) from None
        except OSError as exc:
            raise ToolError(f"tool {template.name!r} failed to start: {exc}") from None
    wall = time.perf_counter() - start
    if proc.returncode != 0:
        raise ToolError(f"tool {template.name!r} exited with status {proc.returncode}",
                        _tail(log_path))
    outputs = template.outputs(bindings)
    for path in outputs:
        if not os.path.isfile(path) or os.path.getsize(path) == 0:
            raise ToolError(f"tool {template.name!r} did not produce {path}", _tail(log_path))
    return ToolRun(argv, proc.returncode, wall, log_path, outputs)


_VERSION_RE = re.compile(r"(?i)\b(?:version|ver\.?)\s*:?\s*([0-9][\w.\-]*)")


def tool_version(log_text):
    """First version string found in a tool log, if any."""
    m = _VERSION_RE.search(log_text)
    return m.group(1) if m else None


# ---------------------------------------------------------------------------
# Bitrate accounting
# ---------------------------------------------------------------------------


def bitrate_fraction(n_bytes, spec):
    if not spec.frame_count:
        raise ValueError("bitrate needs a positive frame count")
    return Fraction(n_bytes * 8) * spec.fps / spec.frame_count / 10**6


def derive_bitrate(n_bytes, spec):
    """Mb/s of a stream of ``n_bytes`` covering ``spec.frame_count`` frames."""
    return float(bitrate_fraction(n_bytes, spec))


@dataclass
class EncodeResult:
    bitstream_path: str
    bitstream_bytes: int
    bitrate_mbps: float
    qp: int
    wall_time: float = 0.0
    tool_log: str = ""
    recon_path: str | None = None

    @classmethod
    def measure(cls, bitstream_path, spec, qp, **kw):
        n = os.path.getsize(bitstream_path)
        if n == 0:
            raise ToolError(f"empty bitstream {bitstream_path}")
        return cls(os.path.abspath(bitstream_path), n, derive_bitrate(n, spec), qp, **kw)

    def to_dict(self):
        return {
            "bitstream": os.path.basename(self.bitstream_path),
            "bitstream_bytes": self.bitstream_bytes,
            "bitrate_mbps": self.bitrate_mbps,
            "qp": self.qp,
            "wall_time_s": round(self.wall_time, 3),
        }


# ---------------------------------------------------------------------------
# VMAF
# ---------------------------------------------------------------------------


class VmafParseError(ValueError):
    pass


@dataclass
class VmafScores:
    available: bool
    pooled: float | None = None
    per_frame: list = field(default_factory=list)
    reason: str = ""

    def to_dict(self):
        if not self.available:
            return {"available": False, "reason": self.reason}
        return {"available": True, "pooled_mean": self.pooled, "per_frame": self.per_frame}


def parse_vmaf_json(text):
    """Parse libvmaf's JSON log (``frames[].metrics.vmaf`` + ``pooled_metrics``)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise VmafParseError(f"VMAF output is not JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise VmafParseError("VMAF output: top level is not an object")
    frames = doc.get("frames")
    if not isinstance(frames, list):
        raise VmafParseError("VMAF output: missing field 'frames'")
    per_frame = []
    for i, fr in enumerate(frames):
        try:
            per_frame.append(float(fr["metrics"]["vmaf"]))
        except (KeyError, TypeError, ValueError):
            raise VmafParseError(f"VMAF output: missing field 'frames[{i}].metrics.vmaf'") from None
    pooled = doc.get("pooled_metrics", {})
    if "vmaf" in pooled:
        try:
            mean = float(pooled["vmaf"]["mean"])
        except (KeyError, TypeError, ValueError):
            raise VmafParseError("VMAF output: missing field 'pooled_metrics.vmaf.mean'") from None
    elif "aggregate" in doc and "VMAF_score" in doc["aggregate"]:
        mean = float(doc["aggregate"]["VMAF_score"])
    elif per_frame:
        mean = sum(per_frame) / len(per_frame)
    else:
        raise VmafParseError("VMAF output: missing field 'pooled_metrics.vmaf'")
    return VmafScores(True, mean, per_frame)


def run_vmaf(ref, dist, template, spec, workdir, log_path=None):
    """Run the VMAF tool; a missing executable yields an unavailable marker.

    The template writes its JSON log to ``{output}``.
    """
    out = os.path.join(workdir, f"vmaf-{os.getpid()}-{time.monotonic_ns()}.json")
    bindings = {
        "ref": ref, "dist": dist, "output": out, "width": spec.width,
        "height": spec.height, "bit_depth": spec.bit_depth,
        "fps": f"{spec.fps_num}/{spec.fps_den}", "frames": spec.frame_count,
        "workdir": workdir,
    }
    try:
        run_tool(template, bindings, log_path, cwd=workdir)
    except ToolNotFound as exc:
        logger.warning("VMAF unavailable: %s", exc)
        return VmafScores(False, reason=str(exc).splitlines()[0])
    try:
        with open(out) as fh:
            return parse_vmaf_json(fh.read())
    except FileNotFoundError:
        raise VmafParseError(f"VMAF tool {template.name!r} wrote no JSON log to {{output}}") from None
    finally:
        if os.path.exists(out):
            os.unlink(out)
