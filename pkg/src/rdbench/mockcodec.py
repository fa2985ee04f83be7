"""Toy intra-only transform codec for hermetic pipeline tests.

Each plane is cut into 8x8 blocks (edge-replicated to a multiple of 8),
transformed with a fixed-point DCT-II, and quantised with step
``2 ** ((qp - 4) / 6)`` on the AC coefficients.  The DC coefficient is kept
at unit precision and coded as a difference to the previous block, so flat
content survives any qp exactly.  Symbols are signed/unsigned Exp-Golomb
codes.  At ``qp <= 4`` (step <= 1) a pixel residual layer makes the codec
lossless.

All arithmetic is integer, so bitstreams are identical across runs,
platforms and kernel backends.

Bitstream layout::

    header  "<4sBIIBIIIB": magic, version, width, height, bit_depth,
                            fps_num, fps_den, frame_count, qp
    frame*  "<I" payload size, payload (Y, Cb, Cr symbols, byte aligned)
"""

import os
import struct

import numpy as np

from . import kernels
from .mediaio import FrameBuffer, MediaError, VideoReader, VideoSpec, VideoWriter

MAGIC = b"RDMC"
VERSION = 1
_HEADER = struct.Struct("<4sBIIBIIIB")
_FRAME = struct.Struct("<I")

QP_MIN, QP_MAX = 0, 51


class BitstreamError(ValueError):
    pass


def check_qp(qp):
    if not (isinstance(qp, (int, np.integer)) and QP_MIN <= qp <= QP_MAX):
        raise ValueError(f"qp must be an integer in [{QP_MIN}, {QP_MAX}], got {qp!r}")
    return int(qp)


def is_lossless(qp):
    return qp <= 4


def _blocks(plane):
    h, w = plane.shape
    ph, pw = -h % 8, -w % 8
    p = np.pad(plane.astype(np.int64), ((0, ph), (0, pw)), mode="edge")
    nby, nbx = p.shape[0] // 8, p.shape[1] // 8
    return np.ascontiguousarray(p.reshape(nby, 8, nbx, 8).swapaxes(1, 2).reshape(-1, 8, 8)), (nby, nbx)


def _unblock(blocks, grid, shape):
    nby, nbx = grid
    p = blocks.reshape(nby, nbx, 8, 8).swapaxes(1, 2).reshape(nby * 8, nbx * 8)
    return p[: shape[0], : shape[1]]


def to_codes(values):
    """Signed Exp-Golomb mapping: 0, 1, -1, 2, -2 ... -> 0, 1, 2, 3, 4 ..."""
    values = np.asarray(values, np.int64)
    return np.where(values > 0, 2 * values - 1, -2 * values)


def block_symbols(levels, residual=None):
    """Code numbers for one plane, in the order the decoder reads them.

    Per block: ue(#AC up to the last nonzero in zigzag order), se(DC delta),
    se(AC levels).  Then, if present, se(residual) for every pixel of every
    block.
    """
    zz = levels.reshape(-1, 64)[:, kernels.ZIGZAG]
    n = zz.shape[0]
    nonzero = zz[:, 1:] != 0
    n_ac = np.where(nonzero.any(axis=1), 63 - np.argmax(nonzero[:, ::-1], axis=1), 0)
    dc = zz[:, 0]
    dc_delta = np.diff(dc, prepend=0)
    table = np.empty((n, 65), np.int64)
    table[:, 0] = n_ac
    table[:, 1] = to_codes(dc_delta)
    table[:, 2:] = to_codes(zz[:, 1:])
    present = np.ones((n, 65), bool)
    present[:, 2:] = np.arange(1, 64)[None, :] <= n_ac[:, None]
    codes = table[present]
    if residual is not None:
        codes = np.concatenate([codes, to_codes(residual.reshape(-1))])
    return codes


def code_plane(plane, qp, max_value):
    """Quantise one plane; returns (code numbers, reconstructed plane)."""
    blocks, grid = _blocks(plane)
    inv_step, shift, deq = kernels.quant_params(qp)
    levels = kernels.quantize_blocks(blocks, kernels.DCT, inv_step, shift)
    recon = kernels.reconstruct_blocks(levels, kernels.DCT, deq, max_value)
    residual = None
    if is_lossless(qp):
        residual = blocks - recon
        recon = blocks
    return block_symbols(levels, residual), _unblock(recon, grid, plane.shape)


def encode_frame(frame, qp):
    """(payload bytes, decoded FrameBuffer) for one frame."""
    codes = []
    planes = []
    for plane in frame.planes:
        c, rec = code_plane(plane, qp, frame.spec.max_value)
        codes.append(c)
        planes.append(rec)
    payload = kernels.pack_ue(np.concatenate(codes)).tobytes()
    return payload, FrameBuffer(*planes, frame.spec)


def decode_payload(payload, spec, qp):
    buf = np.frombuffer(payload, np.uint8)
    inv_step, shift, deq = kernels.quant_params(qp)
    shapes = ((spec.height, spec.width), spec.chroma_shape, spec.chroma_shape)
    pos = 0
    planes = []
    try:
        for shape in shapes:
            grid = (-(-shape[0] // 8), -(-shape[1] // 8))
            n = grid[0] * grid[1]
            levels, residual, pos = kernels.unpack_blocks(buf, pos, n, kernels.ZIGZAG, is_lossless(qp))
            recon = kernels.reconstruct_blocks(levels.reshape(n, 8, 8), kernels.DCT, deq, spec.max_value)
            if is_lossless(qp):
                recon = recon + residual.reshape(n, 8, 8)
            planes.append(_unblock(recon, grid, shape))
    except IndexError:
        raise BitstreamError("frame payload ends prematurely") from None
    return FrameBuffer(*planes, spec)


def mock_encode(frames, qp):
    """Encode an in-memory frame sequence; returns (bitstream, decoded frames)."""
    qp = check_qp(qp)
    frames = list(frames)
    if not frames:
        raise MediaError("nothing to encode")
    spec = frames[0].spec
    chunks, decoded = [], []
    for f in frames:
        if f.spec.geometry() != spec.geometry():
            raise MediaError("mixed specs in one stream")
        payload, rec = encode_frame(f, qp)
        chunks.append(_FRAME.pack(len(payload)) + payload)
        decoded.append(rec)
    header = _pack_header(spec, len(frames), qp)
    return header + b"".join(chunks), decoded


def _pack_header(spec, frames, qp):
    return _HEADER.pack(MAGIC, VERSION, spec.width, spec.height, spec.bit_depth,
                        spec.fps_num, spec.fps_den, frames, qp)


def read_header(data):
    if len(data) < _HEADER.size:
        raise BitstreamError("bitstream shorter than its header")
    magic, version, w, h, bd, fn, fd, frames, qp = _HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        raise BitstreamError("not a mock-codec bitstream")
    return VideoSpec(w, h, bd, fn, fd, frames), qp


def mock_decode(bitstream):
    """Yield decoded frames from an in-memory bitstream."""
    spec, qp = read_header(bitstream)
    pos = _HEADER.size
    for _ in range(spec.frame_count):
        if pos + _FRAME.size > len(bitstream):
            raise BitstreamError("truncated bitstream")
        (size,) = _FRAME.unpack_from(bitstream, pos)
        pos += _FRAME.size
        payload = bitstream[pos : pos + size]
        if len(payload) != size:
            raise BitstreamError("truncated frame payload")
        pos += size
        yield decode_payload(payload, spec, qp)


def encode_file(src, bitstream_path, recon_path, qp, spec=None):
    """Stream ``src`` through the codec, writing bitstream and reconstruction.

    Returns the number of bitstream bytes.
    """
    qp = check_qp(qp)
    with VideoReader(src, spec) as reader, open(bitstream_path, "wb") as bs, \
            VideoWriter(recon_path) as recon:
        bs.write(_pack_header(reader.spec, len(reader), qp))
        for frame in reader:
            payload, rec = encode_frame(frame, qp)
            bs.write(_FRAME.pack(len(payload)))
            bs.write(payload)
            recon.write(rec)
    return os.path.getsize(bitstream_path)


def decode_file(bitstream_path, recon_path):
    with open(bitstream_path, "rb") as fh:
        data = fh.read()
    with VideoWriter(recon_path) as out:
        for frame in mock_decode(data):
            out.write(frame)
