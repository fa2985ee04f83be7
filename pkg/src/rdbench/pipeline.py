"""End-to-end delivery experiments: simulcast, scalable and pre/post-processing.

One *cell* is (sequence, experiment, qp).  Cells are independent, cached by
content hash under ``output_dir`` and resumable: a cell whose manifest exists
and whose recorded files still hash-match is loaded instead of recomputed.

Rate accounting per point:

* simulcast  -- bitrate(low-res stream) + bitrate(full-res stream)
* scalable   -- bitrate(single layered stream)
* prepost    -- bitrate(low-res stream) only

Quality is always measured against the original full-resolution source.
"""

import copy
import hashlib
import json
import logging
import os
import shutil
import threading
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .bd import RDCurve, RDPoint
from .codecs import Source, build_codec, build_upscaler
from .mediaio import MediaError, VideoSpec, parse_fps, write_video
from .metrics import MEAN_OF_FRAME_PSNR, format_db, score_sequence
from .resample import BICUBIC, resample_video
from .tools import ToolError, ToolTemplate, run_tool, run_vmaf, tool_version

logger = logging.getLogger(__name__)

SIMULCAST = "simulcast"
SCALABLE = "scalable"
PREPOST = "prepost"
APPROACHES = (SIMULCAST, SCALABLE, PREPOST)

BASE_QPS = (22, 27, 32, 37)
EXTRA_QP = {SIMULCAST: (42,), PREPOST: (17,), SCALABLE: ()}
SR_QPS = (17, 22, 27, 32, 37)
MAX_QPS = 10


class ConfigError(ValueError):
    pass


class CellFailure(RuntimeError):
    """A cell failed; ``cause`` is the original exception."""

    def __init__(self, cell_name, cause):
        super().__init__(f"{cell_name}: {cause}")
        self.cell_name = cell_name
        self.cause = cause


def default_qps(approach):
    return sorted(set(BASE_QPS) | set(EXTRA_QP[approach]))


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def short_hash(obj, n=16):
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:n]


def dump_json(obj, path):
    """Stable, atomic JSON write (sorted keys, fixed indentation)."""
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Workspace: artifact cache, tool accounting
# ---------------------------------------------------------------------------


class Workspace:
    """Content-addressed artifact store under ``root/artifacts``."""

    def __init__(self, root):
        self.root = os.path.abspath(root)
        self.artifacts = os.path.join(self.root, "artifacts")
        self.scratch = os.path.join(self.root, "scratch")
        os.makedirs(self.artifacts, exist_ok=True)
        os.makedirs(self.scratch, exist_ok=True)
        self.invocations = Counter()
        self.tool_versions = {}
        self._lock = threading.Lock()
        self._key_locks = defaultdict(threading.Lock)
        self._hashes = {}

    # -- bookkeeping ------------------------------------------------------

    def count_invocation(self, kind):
        with self._lock:
            self.invocations[kind] += 1

    @property
    def total_invocations(self):
        return sum(self.invocations.values())

    def run_tool(self, template, bindings, log_path):
        self.count_invocation(template.name)
        run = run_tool(template, bindings, log_path, cwd=self.scratch)
        version = tool_version(run.log())
        if version:
            with self._lock:
                self.tool_versions[template.name] = version
        return run

    def _key_lock(self, key):
        with self._lock:
            return self._key_locks[key]

    def file_hash(self, path):
        st = os.stat(path)
        key = (os.path.abspath(path), st.st_size, st.st_mtime_ns)
        with self._lock:
            if key in self._hashes:
                return self._hashes[key]
        h = hashlib.sha256()
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 22), b""):
                h.update(chunk)
        digest = h.hexdigest()
        with self._lock:
            self._hashes[key] = digest
        return digest

    def artifact(self, prefix, key_obj, ext):
        return os.path.join(self.artifacts, f"{prefix}_{short_hash(key_obj)}{ext}")

    def relpath(self, path):
        return os.path.relpath(path, self.root)

    # -- cached operations ------------------------------------------------

    def in_container(self, src, container):
        """Path of ``src`` in the requested container, converting if needed."""
        if src.container == container:
            return src.path
        ext = ".yuv" if container == "raw" else ".y4m"
        dest = self.artifact("conv", {"src": self.file_hash(src.path), "to": container}, ext)
        with self._key_lock(dest):
            if not os.path.exists(dest):
                with src.open() as reader:
                    write_video(reader, dest, container)
        return dest

    def downscale(self, src):
        """Bicubic factor-2 reduction of ``src``, computed once per source."""
        spec = src.spec
        w, h = spec.width // 2, spec.height // 2
        if w % 2 or h % 2:
            raise MediaError(
                f"{src.path}: {spec.width}x{spec.height} cannot be halved into 4:2:0 ({w}x{h})"
            )
        dest = self.artifact("down", {"src": self.file_hash(src.path), "filter": str(BICUBIC),
                                      "dims": [w, h]}, ".y4m")
        with self._key_lock(dest):
            if not os.path.exists(dest):
                self.count_invocation("downscale")
                with src.open() as reader:
                    write_video(resample_video(reader, (w, h), BICUBIC), dest, "y4m")
        return Source(dest)

    def encode(self, codec, src, qp):
        key = {"codec": codec.fingerprint(), "src": self.file_hash(src.path), "qp": qp}
        bitstream = self.artifact("enc", key, ".bin")
        recon = self.artifact("rec", key, ".y4m")
        sidecar = bitstream + ".json"
        with self._key_lock(bitstream):
            if os.path.exists(sidecar) and os.path.exists(recon) and os.path.exists(bitstream):
                return _load_encode(sidecar, bitstream, recon)
            result = codec.encode(self, src, qp, bitstream, recon)
            dump_json(result.to_dict(), sidecar)
            return result

    def encode_layered(self, codec, src, qp):
        key = {"codec": codec.fingerprint(), "src": self.file_hash(src.path), "qp": qp}
        bitstream = self.artifact("lay", key, ".bin")
        recon_el = self.artifact("recel", key, ".y4m")
        recon_bl = self.artifact("recbl", key, ".y4m")
        sidecar = bitstream + ".json"
        with self._key_lock(bitstream):
            if os.path.exists(sidecar) and os.path.exists(recon_el):
                return _load_encode(sidecar, bitstream, recon_el), _existing(recon_bl)
            result = codec.encode_layered(self, src, qp, bitstream, recon_el, recon_bl)
            dump_json(result.to_dict(), sidecar)
            return result, _existing(recon_bl)

    def upscale(self, upscaler, src, target_dims):
        dest = self.artifact("up", {"up": upscaler.fingerprint(), "src": self.file_hash(src.path),
                                    "dims": list(target_dims)}, ".y4m")
        with self._key_lock(dest):
            if not os.path.exists(dest):
                upscaler.upscale(self, src, target_dims, dest)
        return Source(dest)


def _existing(path):
    return path if os.path.exists(path) else None


def _load_encode(sidecar, bitstream, recon):
    from .tools import EncodeResult

    with open(sidecar) as fh:
        d = json.load(fh)
    return EncodeResult(bitstream, d["bitstream_bytes"], d["bitrate_mbps"], d["qp"],
                        d.get("wall_time_s", 0.0), "", recon)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class PipelineConfig:
    """One (sequence, experiment) combination, fully resolved."""

    approach: str
    sequence: str
    source_8k: Source
    codec: object
    output_dir: str
    label: str = ""
    source_4k: Source | None = None
    upscaler: object = None
    vmaf: ToolTemplate | None = None
    qp_list: list = None
    metrics: tuple = ("psnr_y", "ssim", "vmaf")
    aggregation: str = MEAN_OF_FRAME_PSNR

    def __post_init__(self):
        if self.approach not in APPROACHES:
            raise ConfigError(f"unknown approach {self.approach!r}; use one of {APPROACHES}")
        if self.qp_list is None:
            self.qp_list = default_qps(self.approach)
        self.qp_list = sorted(set(int(q) for q in self.qp_list))
        if not self.qp_list or len(self.qp_list) > MAX_QPS:
            raise ConfigError(f"qp_list needs 1..{MAX_QPS} entries, got {len(self.qp_list)}")
        bad = [q for q in self.qp_list if not 0 <= q <= 51]
        if bad:
            raise ConfigError(f"qp values out of [0, 51]: {bad}")
        if self.approach == SCALABLE and not getattr(self.codec, "layered", False):
            raise ConfigError("the scalable approach needs a layered codec")
        if self.approach != SCALABLE and getattr(self.codec, "layered", False):
            raise ConfigError(f"the {self.approach} approach needs a single-layer codec")
        if self.approach == PREPOST and self.upscaler is None:
            raise ConfigError("the prepost approach needs an upscaler")
        if not self.label:
            self.label = self.approach

    def describe(self):
        """Everything that determines a cell's result, except the qp."""
        return {
            "approach": self.approach,
            "sequence": self.sequence,
            "label": self.label,
            "source_8k": os.path.abspath(self.source_8k.path),
            "source_4k": os.path.abspath(self.source_4k.path) if self.source_4k else None,
            "codec": self.codec.fingerprint(),
            "upscaler": self.upscaler.fingerprint() if self.upscaler else None,
            "vmaf": self.vmaf.fingerprint() if self.vmaf and "vmaf" in self.metrics else None,
            "metrics": sorted(self.metrics),
            "aggregation": self.aggregation,
        }

    def config_hash(self):
        return short_hash(self.describe(), 32)

    def cells(self):
        return [Cell(self, qp) for qp in self.qp_list]


def _source(entry, key, base_dir):
    path = entry.get(key)
    if not path:
        return None
    path = os.path.join(base_dir, path)
    if path.lower().endswith(".y4m"):
        return Source(path)
    try:
        num, den = parse_fps(entry.get("fps", 60))
        factor = 2 if key == "source_4k" else 1
        spec = VideoSpec(int(entry["width"]) // factor, int(entry["height"]) // factor,
                         int(entry.get("bit_depth", 10)), num, den)
    except KeyError as exc:
        raise ConfigError(f"raw source {path} needs {exc.args[0]!r} (width/height/bit_depth/fps)") from None
    return Source(path, spec)


def load_experiment(path):
    """Parse an experiment JSON file into (list of PipelineConfig, settings)."""
    with open(path) as fh:
        doc = json.load(fh)
    return build_experiment(doc, os.path.dirname(os.path.abspath(path)))


def build_experiment(doc, base_dir="."):
    try:
        tools = {name: ToolTemplate.from_config(name, cfg) for name, cfg in doc.get("tools", {}).items()}
        codecs = {name: build_codec(name, cfg, tools) for name, cfg in doc.get("codecs", {}).items()}
        codecs.setdefault("mock", build_codec("mock", {"builtin": "mock"}, tools))
        codecs.setdefault("mock-layered", build_codec("mock-layered", {"builtin": "mock-layered"}, tools))
        upscalers = {name: build_upscaler(name, cfg, tools) for name, cfg in doc.get("upscalers", {}).items()}
        upscalers.setdefault("lanczos", build_upscaler("lanczos", {"builtin": "lanczos"}, tools))
        vmaf = tools[doc["vmaf_tool"]] if doc.get("vmaf_tool") else None
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    output_dir = os.path.join(base_dir, doc.get("output_dir", "rdbench-out"))
    metrics = tuple(doc.get("metrics", ("psnr_y", "ssim", "vmaf")))
    aggregation = doc.get("aggregation", MEAN_OF_FRAME_PSNR)
    configs = []
    sequences = doc.get("sequences", [])
    experiments = doc.get("experiments") or doc.get("approaches") or []
    if not sequences or not experiments:
        raise ConfigError("experiment file needs non-empty 'sequences' and 'experiments'")
    for seq in sequences:
        for exp in experiments:
            approach = exp.get("approach")
            try:
                codec = codecs[exp.get("codec", "mock")]
            except KeyError:
                raise ConfigError(f"experiment {exp.get('label')!r}: unknown codec {exp.get('codec')!r}") from None
            upscaler = None
            if approach == PREPOST:
                name = exp.get("upscaler", "lanczos")
                if name not in upscalers:
                    raise ConfigError(f"experiment {exp.get('label')!r}: unknown upscaler {name!r}")
                upscaler = upscalers[name]
            qps = exp.get("qp_list")
            if qps is None and approach in APPROACHES:
                qps = default_qps(approach) + list(exp.get("extra_qps", []))
            configs.append(PipelineConfig(
                approach=approach,
                sequence=seq["name"],
                source_8k=_source(seq, "source_8k", base_dir),
                source_4k=_source(seq, "source_4k", base_dir),
                codec=codec,
                upscaler=upscaler,
                vmaf=vmaf,
                qp_list=qps,
                metrics=tuple(exp.get("metrics", metrics)),
                aggregation=aggregation,
                output_dir=output_dir,
                label=exp.get("label", approach),
            ))
    settings = {"output_dir": output_dir, "workers": int(doc.get("workers", 1))}
    return configs, settings


# ---------------------------------------------------------------------------
# Cells
# ---------------------------------------------------------------------------


@dataclass
class Cell:
    config: PipelineConfig
    qp: int

    @property
    def name(self):
        return f"{self.config.sequence}/{self.config.label}/qp{self.qp}"

    @property
    def directory(self):
        return os.path.join(self.config.output_dir, "cells", _slug(self.config.sequence),
                            _slug(self.config.label), f"qp{self.qp:02d}")

    @property
    def manifest_path(self):
        return os.path.join(self.directory, "cell.json")

    def cell_hash(self):
        return short_hash({**self.config.describe(), "qp": self.qp}, 32)


def _slug(text):
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in text)


def _quality(ws, cfg, ref, test):
    """Metric report of ``test`` against ``ref``; VMAF only when configured."""
    with ref.open() as r, test.open() as t:
        score = score_sequence(r, t, cfg.aggregation, ssim="ssim" in cfg.metrics)
    report = {
        "aggregates": score.aggregates(),
        "per_frame": [f.to_dict() for f in score.per_frame],
    }
    values = {"psnr_y": score.psnr_y}
    if "ssim" in cfg.metrics:
        values["ssim"] = score.ssim_mean
    if "vmaf" in cfg.metrics and cfg.vmaf is not None:
        ws.count_invocation(cfg.vmaf.name)
        vmaf = run_vmaf(ws.in_container(ref, "y4m"), ws.in_container(test, "y4m"),
                        cfg.vmaf, ref.spec, ws.scratch)
        report["vmaf"] = vmaf.to_dict()
        if vmaf.available:
            values["vmaf"] = vmaf.pooled
    return values, report


def _file_entry(ws, path):
    return {"path": ws.relpath(path), "sha256": ws.file_hash(path)}


def _run_simulcast(ws, cell):
    cfg, qp = cell.config, cell.qp
    src8 = cfg.source_8k
    src4 = cfg.source_4k or ws.downscale(src8)
    e4 = ws.encode(cfg.codec, src4, qp)
    e8 = ws.encode(cfg.codec, src8, qp)
    values, report = _quality(ws, cfg, src8, Source(e8.recon_path))
    _, aux = _quality(ws, _aux_config(cfg), src4, Source(e4.recon_path))
    streams = [dict(role="low", **e4.to_dict()), dict(role="high", **e8.to_dict())]
    files = {
        "source_low": _file_entry(ws, src4.path),
        "bitstream_low": _file_entry(ws, e4.bitstream_path),
        "bitstream_high": _file_entry(ws, e8.bitstream_path),
        "recon_high": _file_entry(ws, e8.recon_path),
    }
    return e4.bitrate_mbps + e8.bitrate_mbps, streams, values, report, aux, files


def _run_scalable(ws, cell):
    cfg, qp = cell.config, cell.qp
    src8 = cfg.source_8k
    layered, recon_bl = ws.encode_layered(cfg.codec, src8, qp)
    el = Source(layered.recon_path)
    if (el.spec.width, el.spec.height) != (src8.spec.width, src8.spec.height):
        raise MediaError(
            f"{cell.name}: decoded enhancement layer is {el.spec.width}x{el.spec.height}, "
            f"source is {src8.spec.width}x{src8.spec.height}; check the layer mapping"
        )
    values, report = _quality(ws, cfg, src8, el)
    aux = None
    if recon_bl is not None:
        base = cfg.source_4k or ws.downscale(src8)
        _, aux = _quality(ws, _aux_config(cfg), base, Source(recon_bl))
    streams = [dict(role="layered", **layered.to_dict())]
    files = {
        "bitstream_layered": _file_entry(ws, layered.bitstream_path),
        "recon_high": _file_entry(ws, layered.recon_path),
    }
    return layered.bitrate_mbps, streams, values, report, aux, files


def _run_prepost(ws, cell):
    cfg, qp = cell.config, cell.qp
    src8 = cfg.source_8k
    src4 = cfg.source_4k or ws.downscale(src8)
    e4 = ws.encode(cfg.codec, src4, qp)
    target = (src8.spec.width, src8.spec.height)
    up = ws.upscale(cfg.upscaler, Source(e4.recon_path), target)
    if (up.spec.width, up.spec.height) != target:
        raise MediaError(f"{cell.name}: upscaled output is {up.spec.width}x{up.spec.height}, expected {target}")
    values, report = _quality(ws, cfg, src8, up)
    _, aux = _quality(ws, _aux_config(cfg), src4, Source(e4.recon_path))
    streams = [dict(role="low", **e4.to_dict())]
    files = {
        "source_low": _file_entry(ws, src4.path),
        "bitstream_low": _file_entry(ws, e4.bitstream_path),
        "recon_high": _file_entry(ws, up.path),
    }
    return e4.bitrate_mbps, streams, values, report, aux, files


def _aux_config(cfg):
    """Low-resolution (backward-compatible) quality: PSNR/SSIM only."""
    aux = copy.copy(cfg)
    aux.metrics = tuple(m for m in cfg.metrics if m != "vmaf")
    return aux


_RUNNERS = {SIMULCAST: _run_simulcast, SCALABLE: _run_scalable, PREPOST: _run_prepost}


def _cell_is_current(ws, cell):
    try:
        with open(cell.manifest_path) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return None
    if manifest.get("cell_hash") != cell.cell_hash():
        return None
    current = True
    for entry in manifest.get("files", {}).values():
        path = os.path.join(ws.root, entry["path"])
        if not os.path.isfile(path):
            current = False
        elif ws.file_hash(path) != entry["sha256"]:
            # damaged artifact: evict it so the cache cannot hand it back
            logger.warning("%s: %s changed on disk; recomputing", cell.name, entry["path"])
            for victim in (path, path + ".json"):
                if os.path.exists(victim):
                    os.unlink(victim)
            current = False
    return manifest if current else None


def run_cell(ws, cell):
    """Run (or resume) one cell and return its manifest dict."""
    manifest = _cell_is_current(ws, cell)
    if manifest is not None:
        logger.info("%s: up to date", cell.name)
        return manifest
    logger.info("%s: running", cell.name)
    cfg = cell.config
    bitrate, streams, values, report, aux, files = _RUNNERS[cfg.approach](ws, cell)
    os.makedirs(cell.directory, exist_ok=True)
    dump_json(_serialisable_report(report), os.path.join(cell.directory, "metrics.json"))
    manifest = {
        "cell": {"sequence": cfg.sequence, "experiment": cfg.label, "approach": cfg.approach,
                 "qp": cell.qp},
        "cell_hash": cell.cell_hash(),
        "config_hash": cfg.config_hash(),
        "bitrate_mbps": bitrate,
        "streams": streams,
        "metrics": {k: format_db(v) for k, v in values.items()},
        "aux_metrics_low": aux["aggregates"] if aux else None,
        "files": files,
    }
    dump_json(manifest, cell.manifest_path)
    return manifest


def _serialisable_report(report):
    return json.loads(json.dumps(report, default=str))


# ---------------------------------------------------------------------------
# Experiments and sweeps
# ---------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: PipelineConfig
    curve: RDCurve
    points: list
    provenance: dict = field(default_factory=dict)

    @property
    def curve_path(self):
        return os.path.join(self.config.output_dir, "curves",
                            f"{_slug(self.config.sequence)}__{_slug(self.config.label)}.json")

    def write_curve(self):
        os.makedirs(os.path.dirname(self.curve_path), exist_ok=True)
        doc = self.curve.to_dict()
        doc["sequence"] = self.config.sequence
        doc["approach"] = self.config.approach
        dump_json(doc, self.curve_path)
        return self.curve_path


def _curve_from(cfg, manifests):
    points = []
    for m in manifests:
        metrics = {}
        for k, v in m["metrics"].items():
            metrics[k] = float("inf") if v == "inf" else v
        points.append(RDPoint(m["bitrate_mbps"], metrics, m["cell"]["qp"]))
    return RDCurve(cfg.label, points)


def _finish(cfg, ws, manifests):
    result = ExperimentResult(
        cfg,
        _curve_from(cfg, manifests),
        sorted(manifests, key=lambda m: m["bitrate_mbps"]),
        {"config_hash": cfg.config_hash(), "tool_versions": dict(sorted(ws.tool_versions.items()))},
    )
    result.write_curve()
    return result


def run_experiment(cfg, ws=None):
    ws = ws or Workspace(cfg.output_dir)
    manifests = []
    for cell in cfg.cells():
        try:
            manifests.append(run_cell(ws, cell))
        except Exception as exc:
            raise CellFailure(cell.name, exc) from exc
    return _finish(cfg, ws, manifests)


def run_simulcast(cfg, ws=None):
    if cfg.approach != SIMULCAST:
        raise ConfigError(f"expected a simulcast config, got {cfg.approach}")
    return run_experiment(cfg, ws)


def run_scalable(cfg, ws=None):
    if cfg.approach != SCALABLE:
        raise ConfigError(f"expected a scalable config, got {cfg.approach}")
    return run_experiment(cfg, ws)


def run_prepost(cfg, ws=None):
    if cfg.approach != PREPOST:
        raise ConfigError(f"expected a prepost config, got {cfg.approach}")
    return run_experiment(cfg, ws)


@dataclass
class SweepResult:
    results: list
    failures: list
    scheduled: int
    invocations: int

    @property
    def ok(self):
        return not self.failures


def sweep(configs, workers=1, ws=None, clean=False):
    """Run every cell of every config with a bounded worker pool.

    A failing cell does not stop the others; its error is listed in
    ``failures`` and the curve of its experiment is left without that point.
    """
    if not configs:
        raise ConfigError("nothing to sweep")
    roots = {c.output_dir for c in configs}
    if len(roots) != 1:
        raise ConfigError("all configs of one sweep must share output_dir")
    root = roots.pop()
    if clean:
        for sub in ("artifacts", "scratch", "cells", "curves"):
            shutil.rmtree(os.path.join(root, sub), ignore_errors=True)
    ws = ws or Workspace(root)
    before = ws.total_invocations
    cells = [cell for cfg in configs for cell in cfg.cells()]
    outcomes = {}

    def work(cell):
        try:
            outcomes[id(cell)] = ("ok", run_cell(ws, cell))
        except Exception as exc:  # isolate cells
            logger.error("%s failed: %s", cell.name, exc)
            outcomes[id(cell)] = ("error", CellFailure(cell.name, exc))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        list(pool.map(work, cells))

    results, failures = [], []
    for cfg in configs:
        manifests = []
        for cell in cells:
            if cell.config is not cfg:
                continue
            status, value = outcomes[id(cell)]
            if status == "ok":
                manifests.append(value)
            else:
                failures.append(value)
        if manifests:
            try:
                results.append(_finish(cfg, ws, manifests))
            except ValueError as exc:
                failures.append(CellFailure(f"{cfg.sequence}/{cfg.label}", exc))
    return SweepResult(results, failures, len(cells), ws.total_invocations - before)


# ---------------------------------------------------------------------------
# Super-resolution training data
# ---------------------------------------------------------------------------


def prepare_sr_training_pairs(hr_items, codec, qp_set=SR_QPS, out_dir="sr-pairs", ws=None):
    """Bicubic /2, encode at every qp, decode; returns the pair manifest.

    Per-item failures are logged and skipped; they appear under ``failures``.
    HR items are Y4M files (a still image is a one-frame Y4M).
    """
    qp_set = sorted(set(int(q) for q in qp_set))
    if not qp_set:
        raise ConfigError("qp_set must not be empty")
    ws = ws or Workspace(out_dir)
    pairs, failures = [], []
    for item in hr_items:
        path = os.fspath(item.path if isinstance(item, Source) else item)
        src = item if isinstance(item, Source) else Source(path)
        try:
            lr = ws.downscale(src)
            for qp in qp_set:
                enc = ws.encode(codec, lr, qp)
                pairs.append({"hr_path": os.path.abspath(path),
                              "lr_decoded_path": enc.recon_path, "qp": qp,
                              "lr_bitrate_mbps": enc.bitrate_mbps})
        except (MediaError, ToolError, OSError) as exc:
            logger.warning("skipping %s: %s", path, exc)
            failures.append({"item": os.path.abspath(path), "error": str(exc)})
    manifest = {"qp_set": qp_set, "pairs": pairs, "failures": failures, "failed": len(failures)}
    os.makedirs(ws.root, exist_ok=True)
    dump_json(manifest, os.path.join(ws.root, "sr_pairs.json"))
    return manifest
