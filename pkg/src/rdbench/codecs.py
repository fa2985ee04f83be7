"""Codec and upscaler back-ends used by the pipelines.

Every back-end writes its reconstruction as Y4M so downstream stages never
need out-of-band geometry.  External tools that speak raw YUV get converted
copies in both directions.
"""

import os
import time
from dataclasses import dataclass
from functools import cached_property

from . import mockcodec
from .mediaio import MediaError, VideoReader, VideoSpec, probe_stream, write_video
from .resample import Filter, resample_video
from .tools import EncodeResult, ToolError, ToolTemplate


@dataclass(frozen=True)
class Source:
    """A video file plus, for raw YUV, the geometry needed to read it."""

    path: str
    raw_spec: VideoSpec | None = None

    def open(self):
        return VideoReader(self.path, self.raw_spec)

    @cached_property
    def spec(self):
        return probe_stream(self.path, self.raw_spec)

    @property
    def container(self):
        return "raw" if self.raw_spec is not None else "y4m"


def _geometry_bindings(spec):
    return {
        "width": spec.width,
        "height": spec.height,
        "fps": f"{spec.fps_num}/{spec.fps_den}",
        "frames": spec.frame_count,
        "bit_depth": spec.bit_depth,
    }


def import_reconstruction(path, container, expected, dest, what):
    """Validate a tool's decoded output against ``expected`` and store it as Y4M."""
    if not os.path.isfile(path) or os.path.getsize(path) == 0:
        raise ToolError(f"{what}: no decoded output at {path}")
    if container == "raw":
        size = os.path.getsize(path)
        if size != expected.frame_size_bytes * expected.frame_count:
            raise MediaError(
                f"{what}: decoded size {size} bytes does not match "
                f"{expected.frame_count} frames of {expected.width}x{expected.height}"
            )
        spec = expected
    else:
        spec = probe_stream(path)
        if (spec.width, spec.height) != (expected.width, expected.height):
            raise MediaError(
                f"{what}: decoded resolution {spec.width}x{spec.height} != "
                f"expected {expected.width}x{expected.height}"
            )
        if spec.frame_count != expected.frame_count:
            raise MediaError(f"{what}: decoded {spec.frame_count} frames, expected {expected.frame_count}")
    with VideoReader(path, spec if container == "raw" else None) as reader:
        write_video(reader, dest, "y4m")
    return dest


class MockCodec:
    """The built-in toy codec, run in-process."""

    name = "mock"
    layered = False

    def fingerprint(self):
        return {"builtin": "mock", "version": mockcodec.VERSION}

    def encode(self, ws, src, qp, bitstream, recon):
        start = time.perf_counter()
        ws.count_invocation("mock-encode")
        mockcodec.encode_file(src.path, bitstream, recon, qp, spec=src.raw_spec)
        return EncodeResult.measure(bitstream, src.spec, qp, wall_time=time.perf_counter() - start,
                                    recon_path=recon)


class ExternalCodec:
    """Single-layer encoder (+ optional separate decoder) driven by templates.

    The encoder gets ``{input} {output} {qp} {width} {height} {fps} {frames}
    {bit_depth}``; it may write its reconstruction to ``{recon}``.  If a
    decoder template is given it is run with ``{input}`` = bitstream and
    ``{output}`` = reconstruction.
    """

    layered = False

    def __init__(self, name, encoder, decoder=None, container="raw"):
        if container not in ("raw", "y4m"):
            raise ValueError(f"codec {name!r}: container must be raw or y4m")
        self.name = name
        self.encoder = encoder
        self.decoder = decoder
        self.container = container

    def fingerprint(self):
        return {
            "encoder": self.encoder.fingerprint(),
            "decoder": self.decoder.fingerprint() if self.decoder else None,
            "container": self.container,
        }

    def _decoded_path(self, recon):
        return recon + (".dec.yuv" if self.container == "raw" else ".dec.y4m")

    def encode(self, ws, src, qp, bitstream, recon):
        spec = src.spec
        raw_recon = self._decoded_path(recon)
        bindings = {"input": ws.in_container(src, self.container), "output": bitstream,
                    "recon": raw_recon, "qp": qp, "workdir": ws.scratch, **_geometry_bindings(spec)}
        run = ws.run_tool(self.encoder, bindings, bitstream + ".enc.log")
        wall, log = run.wall_time, run.log()
        if self.decoder is not None:
            dec = ws.run_tool(self.decoder, {"input": bitstream, "output": raw_recon,
                                             "workdir": ws.scratch, **_geometry_bindings(spec)},
                              bitstream + ".dec.log")
            wall += dec.wall_time
        import_reconstruction(raw_recon, self.container, spec, recon, f"codec {self.name!r}")
        os.unlink(raw_recon)
        return EncodeResult.measure(bitstream, spec, qp, wall_time=wall, tool_log=log,
                                    recon_path=recon)


class MockLayeredCodec:
    """Stub scalable codec: mock BL (bicubic 1/2) + mock EL, concatenated.

    Its single layered bitstream is exactly as large as the two simulcast
    streams together, which makes it a parity check for rate accounting.
    """

    name = "mock-layered"
    layered = True

    def fingerprint(self):
        return {"builtin": "mock-layered", "version": mockcodec.VERSION}

    def encode_layered(self, ws, src, qp, bitstream, recon_el, recon_bl):
        start = time.perf_counter()
        base = ws.downscale(src)
        bl = ws.encode(MockCodec(), base, qp)
        el = ws.encode(MockCodec(), src, qp)
        with open(bitstream, "wb") as out:
            for part in (bl.bitstream_path, el.bitstream_path):
                with open(part, "rb") as fh:
                    out.write(fh.read())
        _link_or_copy(el.recon_path, recon_el)
        _link_or_copy(bl.recon_path, recon_bl)
        return EncodeResult.measure(bitstream, src.spec, qp, wall_time=time.perf_counter() - start,
                                    recon_path=recon_el)


class ExternalLayeredCodec:
    """Scalable encoder producing one BL+EL bitstream from the full-resolution input.

    The tool performs its own base-layer downscaling.  ``el_decoder`` (or the
    encoder's ``{recon}`` output) must yield the full-resolution layer.
    """

    layered = True

    def __init__(self, name, encoder, el_decoder=None, bl_decoder=None, container="raw"):
        self.name = name
        self.encoder = encoder
        self.el_decoder = el_decoder
        self.bl_decoder = bl_decoder
        self.container = container

    def fingerprint(self):
        return {
            "encoder": self.encoder.fingerprint(),
            "el_decoder": self.el_decoder.fingerprint() if self.el_decoder else None,
            "bl_decoder": self.bl_decoder.fingerprint() if self.bl_decoder else None,
            "container": self.container,
        }

    def encode_layered(self, ws, src, qp, bitstream, recon_el, recon_bl):
        spec = src.spec
        ext = ".dec.yuv" if self.container == "raw" else ".dec.y4m"
        raw_el = recon_el + ext
        bindings = {"input": ws.in_container(src, self.container), "output": bitstream,
                    "recon": raw_el, "qp": qp, "workdir": ws.scratch, **_geometry_bindings(spec)}
        run = ws.run_tool(self.encoder, bindings, bitstream + ".enc.log")
        wall, log = run.wall_time, run.log()
        if self.el_decoder is not None:
            dec = ws.run_tool(self.el_decoder, {"input": bitstream, "output": raw_el,
                                                "workdir": ws.scratch, **_geometry_bindings(spec)},
                              bitstream + ".el.log")
            wall += dec.wall_time
        import_reconstruction(raw_el, self.container, spec, recon_el,
                              f"layered codec {self.name!r} (enhancement layer)")
        os.unlink(raw_el)
        if self.bl_decoder is not None:
            bl_spec = VideoSpec(spec.width // 2, spec.height // 2, spec.bit_depth,
                                spec.fps_num, spec.fps_den, spec.frame_count)
            raw_bl = recon_bl + ext
            ws.run_tool(self.bl_decoder, {"input": bitstream, "output": raw_bl,
                                          "workdir": ws.scratch, **_geometry_bindings(bl_spec)},
                        bitstream + ".bl.log")
            import_reconstruction(raw_bl, self.container, bl_spec, recon_bl,
                                  f"layered codec {self.name!r} (base layer)")
            os.unlink(raw_bl)
        return EncodeResult.measure(bitstream, spec, qp, wall_time=wall, tool_log=log,
                                    recon_path=recon_el)


def _link_or_copy(src, dst):
    if os.path.exists(dst):
        os.unlink(dst)
    try:
        os.link(src, dst)
    except OSError:
        with open(src, "rb") as a, open(dst, "wb") as b:
            b.write(a.read())


class LanczosUpscaler:
    def __init__(self, a=3):
        self.filter = Filter("lanczos", a)
        self.name = f"lanczos{self.filter.param}"

    def fingerprint(self):
        return {"builtin": "lanczos", "a": self.filter.param}

    def upscale(self, ws, src, target_dims, out_path):
        ws.count_invocation("upscale")
        with src.open() as reader:
            write_video(resample_video(reader, target_dims, self.filter), out_path, "y4m")
        return out_path


class ExternalUpscaler:
    """External super-resolution process mapping an LR video file to an HR file."""

    def __init__(self, name, template, container="y4m"):
        self.name = name
        self.template = template
        self.container = container

    def fingerprint(self):
        return {"tool": self.template.fingerprint(), "container": self.container}

    def upscale(self, ws, src, target_dims, out_path):
        lr = src.spec
        tw, th = target_dims
        hr = VideoSpec(tw, th, lr.bit_depth, lr.fps_num, lr.fps_den, lr.frame_count)
        raw_out = out_path + (".sr.yuv" if self.container == "raw" else ".sr.y4m")
        bindings = {"input": ws.in_container(src, self.container), "output": raw_out,
                    "workdir": ws.scratch, **_geometry_bindings(hr)}
        ws.run_tool(self.template, bindings, out_path + ".log")
        import_reconstruction(raw_out, self.container, hr, out_path, f"upscaler {self.name!r}")
        os.unlink(raw_out)
        return out_path


def build_tool(name, tools):
    try:
        return tools[name]
    except KeyError:
        raise ValueError(f"unknown tool {name!r}") from None


def build_codec(name, cfg, tools):
    if cfg.get("builtin") == "mock":
        return MockCodec()
    if cfg.get("builtin") == "mock-layered":
        return MockLayeredCodec()
    if "builtin" in cfg:
        raise ValueError(f"codec {name!r}: unknown builtin {cfg['builtin']!r}")
    container = cfg.get("container", "raw")
    if "layered_encoder" in cfg:
        return ExternalLayeredCodec(
            name,
            build_tool(cfg["layered_encoder"], tools),
            build_tool(cfg["el_decoder"], tools) if cfg.get("el_decoder") else None,
            build_tool(cfg["bl_decoder"], tools) if cfg.get("bl_decoder") else None,
            container,
        )
    if "encoder" not in cfg:
        raise ValueError(f"codec {name!r}: needs 'builtin', 'encoder' or 'layered_encoder'")
    return ExternalCodec(
        name,
        build_tool(cfg["encoder"], tools),
        build_tool(cfg["decoder"], tools) if cfg.get("decoder") else None,
        container,
    )


def build_upscaler(name, cfg, tools):
    if cfg.get("builtin") == "lanczos":
        return LanczosUpscaler(cfg.get("a", 3))
    if "tool" in cfg:
        return ExternalUpscaler(name, build_tool(cfg["tool"], tools), cfg.get("container", "y4m"))
    raise ValueError(f"upscaler {name!r}: needs builtin 'lanczos' or a 'tool'")


__all__ = [
    "Source", "MockCodec", "ExternalCodec", "MockLayeredCodec", "ExternalLayeredCodec",
    "LanczosUpscaler", "ExternalUpscaler", "build_codec", "build_upscaler", "ToolTemplate",
]
