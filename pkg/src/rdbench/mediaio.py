"""Raw planar YUV 4:2:0 and Y4M reading/writing.

Frames are accessed one at a time; nothing here loads a whole sequence into
memory.  10-bit samples live in little-endian 16-bit words.
"""

import os
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

Y4M_MAGIC = b"YUV4MPEG2"
FRAME_TAG = b"FRAME"

# Y4M colourspace tags accepted for 4:2:0 input, mapped to bit depth.
_CHROMA_TAGS = {
    "420": 8,
    "420jpeg": 8,
    "420paldv": 8,
    "420mpeg2": 8,
    "420p10": 10,
}


class MediaError(ValueError):
    """Malformed, truncated or geometrically invalid video data."""


@dataclass(frozen=True)
class VideoSpec:
    width: int
    height: int
    bit_depth: int = 8
    fps_num: int = 60
    fps_den: int = 1
    frame_count: int | None = None
    chroma: str = "420"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise MediaError(f"dimensions must be positive, got {self.width}x{self.height}")
        if self.chroma != "420":
            raise MediaError(f"unsupported chroma layout {self.chroma!r}; only 4:2:0")
        if self.width % 2 or self.height % 2:
            raise MediaError(f"4:2:0 needs even dimensions, got {self.width}x{self.height}")
        if self.bit_depth not in (8, 10):
            raise MediaError(f"bit depth must be 8 or 10, got {self.bit_depth}")
        if self.fps_den <= 0 or self.fps_num <= 0:
            raise MediaError(f"invalid frame rate {self.fps_num}/{self.fps_den}")
        if self.frame_count is not None and self.frame_count < 0:
            raise MediaError("frame_count must be non-negative")

    @property
    def fps(self):
        return Fraction(self.fps_num, self.fps_den)

    @property
    def max_value(self):
        return (1 << self.bit_depth) - 1

    @property
    def dtype(self):
        return np.dtype(np.uint8) if self.bit_depth == 8 else np.dtype("<u2")

    @property
    def bytes_per_sample(self):
        return 1 if self.bit_depth == 8 else 2

    @property
    def chroma_shape(self):
        return self.height // 2, self.width // 2

    @property
    def frame_size_bytes(self):
        luma = self.width * self.height
        return (luma + 2 * (luma // 4)) * self.bytes_per_sample

    def geometry(self):
        """Everything except frame_count; used to compare streams."""
        return (self.width, self.height, self.bit_depth, self.fps_num, self.fps_den, self.chroma)

    def with_frames(self, n):
        return replace(self, frame_count=n)

    def y4m_header(self):
        tag = "C420p10" if self.bit_depth == 10 else "C420jpeg"
        return (
            f"YUV4MPEG2 W{self.width} H{self.height} F{self.fps_num}:{self.fps_den} "
            f"Ip A1:1 {tag}\n"
        ).encode("ascii")

    def to_dict(self):
        return {
            "width": self.width,
            "height": self.height,
            "bit_depth": self.bit_depth,
            "chroma": self.chroma,
            "fps_num": self.fps_num,
            "fps_den": self.fps_den,
            "frame_count": self.frame_count,
        }


def parse_fps(text):
    """Parse ``60``, ``60:1``, ``60000/1001`` or ``59.94`` into (num, den)."""
    text = str(text).strip()
    for sep in (":", "/"):
        if sep in text:
            num, den = text.split(sep, 1)
            return int(num), int(den)
    frac = Fraction(text).limit_denominator(1001)
    return frac.numerator, frac.denominator


@dataclass(frozen=True, eq=False)
class FrameBuffer:
    """One decoded 4:2:0 frame; planes are read-only numpy arrays."""

    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    spec: VideoSpec

    def __post_init__(self):
        s = self.spec
        expected = ((s.height, s.width), s.chroma_shape, s.chroma_shape)
        for name, plane, shape in zip("yuv", self.planes, expected):
            if plane.shape != shape:
                raise MediaError(f"plane {name} has shape {plane.shape}, expected {shape}")
        planes = []
        native = s.dtype.newbyteorder("=")
        for plane in self.planes:
            raw = np.asarray(plane)
            if raw.size:
                lo, hi = raw.min(), raw.max()
                if lo < 0 or hi > s.max_value:
                    raise MediaError(
                        f"sample range [{lo}, {hi}] outside [0, {s.max_value}] for {s.bit_depth}-bit"
                    )
            plane = np.ascontiguousarray(raw.astype(native, copy=raw.flags.writeable))
            plane.setflags(write=False)
            planes.append(plane)
        object.__setattr__(self, "y", planes[0])
        object.__setattr__(self, "u", planes[1])
        object.__setattr__(self, "v", planes[2])

    @property
    def planes(self):
        return (self.y, self.u, self.v)

    def __eq__(self, other):
        if not isinstance(other, FrameBuffer):
            return NotImplemented
        return self.spec.geometry() == other.spec.geometry() and all(
            np.array_equal(a, b) for a, b in zip(self.planes, other.planes)
        )

    def to_bytes(self):
        dt = self.spec.dtype
        return b"".join(p.astype(dt, copy=False).tobytes() for p in self.planes)

    @classmethod
    def from_bytes(cls, data, spec):
        if len(data) != spec.frame_size_bytes:
            raise MediaError(f"truncated frame: got {len(data)} of {spec.frame_size_bytes} bytes")
        samples = np.frombuffer(data, dtype=spec.dtype)
        n_y = spec.width * spec.height
        n_c = n_y // 4
        ch, cw = spec.chroma_shape
        return cls(
            samples[:n_y].reshape(spec.height, spec.width),
            samples[n_y : n_y + n_c].reshape(ch, cw),
            samples[n_y + n_c :].reshape(ch, cw),
            spec,
        )

    @classmethod
    def filled(cls, spec, y, u=None, v=None):
        """Constant frame, mostly for tests and synthetic content."""
        mid = 1 << (spec.bit_depth - 1)
        ch = spec.chroma_shape
        return cls(
            np.full((spec.height, spec.width), y, spec.dtype),
            np.full(ch, mid if u is None else u, spec.dtype),
            np.full(ch, mid if v is None else v, spec.dtype),
            spec,
        )


def _parse_y4m_header(line):
    tokens = line.decode("ascii", errors="replace").split()
    if not tokens or tokens[0] != "YUV4MPEG2":
        raise MediaError("missing YUV4MPEG2 signature")
    fields = {}
    for tok in tokens[1:]:
        fields[tok[0]] = tok[1:]
    try:
        width = int(fields["W"])
        height = int(fields["H"])
    except (KeyError, ValueError):
        raise MediaError(f"Y4M header lacks valid W/H: {line!r}") from None
    fps_num, fps_den = 25, 1
    if "F" in fields:
        try:
            fps_num, fps_den = (int(p) for p in fields["F"].split(":"))
        except ValueError:
            raise MediaError(f"bad Y4M frame rate {fields['F']!r}") from None
    interlace = fields.get("I", "p")
    if interlace not in ("p", "?"):
        raise MediaError(f"interlaced Y4M ({interlace!r}) is not supported")
    chroma = fields.get("C", "420jpeg")
    if chroma not in _CHROMA_TAGS:
        raise MediaError(f"unsupported chroma tag C{chroma}")
    return VideoSpec(width, height, _CHROMA_TAGS[chroma], fps_num, fps_den)


class VideoReader:
    """Random-access frame reader over a raw or Y4M file.

    For raw files the geometry must be supplied through ``spec``; the frame
    count is derived from the file size.
    """

    def __init__(self, path, spec=None):
        self.path = os.fspath(path)
        self._fh = open(self.path, "rb")
        try:
            self._open(spec)
        except Exception:
            self._fh.close()
            raise

    def _open(self, spec):
        head = self._fh.read(len(Y4M_MAGIC))
        self._fh.seek(0)
        if head == Y4M_MAGIC:
            self.container = "y4m"
            header = self._fh.readline(4096)
            if not header.endswith(b"\n"):
                raise MediaError("unterminated Y4M header")
            base = _parse_y4m_header(header)
            self._offsets = self._index_y4m(base, len(header))
            self.spec = base.with_frames(len(self._offsets))
        else:
            if spec is None:
                raise MediaError(
                    f"{self.path}: raw input needs explicit width/height/bit depth/fps"
                )
            self.container = "raw"
            size = os.fstat(self._fh.fileno()).st_size
            frame = spec.frame_size_bytes
            if size % frame:
                raise MediaError(
                    f"{self.path}: size {size} is not a multiple of the frame size {frame} "
                    f"for {spec.width}x{spec.height} {spec.bit_depth}-bit 4:2:0"
                )
            self.spec = spec.with_frames(size // frame)
            self._offsets = [i * frame for i in range(size // frame)]

    def _index_y4m(self, spec, pos):
        size = os.fstat(self._fh.fileno()).st_size
        frame = spec.frame_size_bytes
        offsets = []
        while pos < size:
            self._fh.seek(pos)
            line = self._fh.readline(1024)
            if not line.startswith(FRAME_TAG) or not line.endswith(b"\n"):
                raise MediaError(f"{self.path}: bad FRAME marker at byte {pos}")
            data = pos + len(line)
            if data + frame > size:
                raise MediaError(f"{self.path}: truncated frame {len(offsets)}")
            offsets.append(data)
            pos = data + frame
        return offsets

    def __len__(self):
        return len(self._offsets)

    def read_frame(self, index):
        if not 0 <= index < len(self._offsets):
            raise IndexError(f"frame {index} out of range [0, {len(self._offsets)})")
        self._fh.seek(self._offsets[index])
        return FrameBuffer.from_bytes(self._fh.read(self.spec.frame_size_bytes), self.spec)

    def __iter__(self):
        for i in range(len(self)):
            yield self.read_frame(i)

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def probe_stream(path, spec=None):
    """Return the VideoSpec of ``path`` with frame_count filled in."""
    with VideoReader(path, spec) as reader:
        return reader.spec


def read_frame(path_or_reader, index, spec=None):
    if isinstance(path_or_reader, VideoReader):
        return path_or_reader.read_frame(index)
    with VideoReader(path_or_reader, spec) as reader:
        return reader.read_frame(index)


def container_for(path):
    return "y4m" if os.fspath(path).lower().endswith(".y4m") else "raw"


class VideoWriter:
    """Streaming writer; all frames must share the first frame's geometry."""

    def __init__(self, path, container=None):
        self.path = os.fspath(path)
        self.container = container or container_for(self.path)
        if self.container not in ("raw", "y4m"):
            raise ValueError(f"unknown container {self.container!r}")
        self.spec = None
        self.count = 0
        self._fh = open(self.path, "wb")

    def write(self, frame):
        if self.spec is None:
            self.spec = frame.spec
            if self.container == "y4m":
                self._fh.write(self.spec.y4m_header())
        elif frame.spec.geometry() != self.spec.geometry():
            raise MediaError(
                f"mixed specs in one stream: {frame.spec.geometry()} vs {self.spec.geometry()}"
            )
        if self.container == "y4m":
            self._fh.write(b"FRAME\n")
        self._fh.write(frame.to_bytes())
        self.count += 1

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, *exc):
        self.close()
        if exc_type is None and self.count == 0:
            os.unlink(self.path)
            raise MediaError("nothing to write: empty frame sequence")


def write_video(frames, path, container=None):
    """Write ``frames`` (any iterable) to ``path``; returns the written spec."""
    tmp = f"{os.fspath(path)}.part"
    try:
        with VideoWriter(tmp, container or container_for(path)) as writer:
            for frame in frames:
                writer.write(frame)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    os.replace(tmp, path)
    return writer.spec.with_frames(writer.count)
