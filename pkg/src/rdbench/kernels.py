"""Hot inner loops, each in a numba flavour and a numpy flavour.

The two flavours perform identical arithmetic in identical order, so they
agree bit-for-bit; ``tests/test_kernels.py`` holds them to that.  The public
names at the bottom of the module are bound to whichever backend
:mod:`rdbench._accel` selected.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# Tap filtering (resampling and SSIM windows)
# ---------------------------------------------------------------------------


@njit
def _filter_rows_nb(src, idx, w):
    rows = src.shape[0]
    n_out, taps = idx.shape
    out = np.empty((rows, n_out), np.float64)
    for r in range(rows):
        for j in range(n_out):
            acc = 0.0
            for k in range(taps):
                acc += w[j, k] * src[r, idx[j, k]]
            out[r, j] = acc
    return out


def _filter_rows_np(src, idx, w):
    src = np.asarray(src, np.float64)
    out = np.zeros((src.shape[0], idx.shape[0]), np.float64)
    for k in range(idx.shape[1]):
        out += w[:, k] * src[:, idx[:, k]]
    return out


@njit
def _filter_cols_nb(src, idx, w):
    cols = src.shape[1]
    n_out, taps = idx.shape
    out = np.empty((n_out, cols), np.float64)
    for i in range(n_out):
        for c in range(cols):
            acc = 0.0
            for k in range(taps):
                acc += w[i, k] * src[idx[i, k], c]
            out[i, c] = acc
    return out


def _filter_cols_np(src, idx, w):
    src = np.asarray(src, np.float64)
    out = np.zeros((idx.shape[0], src.shape[1]), np.float64)
    for k in range(idx.shape[1]):
        out += w[:, k, None] * src[idx[:, k], :]
    return out


# ---------------------------------------------------------------------------
# Mock codec: fixed-point 8x8 DCT with integer quantisation
# ---------------------------------------------------------------------------

DCT_SHIFT = 15
# 2^14 / 2^(r/6) and 2^6 * 2^(r/6), r = 0..5
INV_STEP = np.array([16384, 14596, 13004, 11585, 10321, 9195], np.int64)
STEP = np.array([64, 72, 81, 91, 102, 114], np.int64)


def dct_matrix():
    n = 8
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    c = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * j + 1) * k / (2 * n))
    c[0, :] = np.sqrt(1.0 / n)
    return np.round(c * (1 << DCT_SHIFT)).astype(np.int64)


DCT = dct_matrix()


def _zigzag():
    order = sorted(
        ((r, c) for r in range(8) for c in range(8)),
        key=lambda p: (p[0] + p[1], p[0] if (p[0] + p[1]) % 2 else p[1]),
    )
    return np.array([r * 8 + c for r, c in order], np.int64)


ZIGZAG = _zigzag()


def quant_params(qp):
    """(inverse step, forward shift, dequant multiplier) for one qp."""
    q, r = divmod(qp - 4, 6)
    return int(INV_STEP[r]), 2 * DCT_SHIFT + 14 + q, int(STEP[r]) << (q + 1)


@njit
def _round_shift_nb(v, sh):
    half = np.int64(1) << (sh - 1)
    if v >= 0:
        return (v + half) >> sh
    return -((-v + half) >> sh)


@njit
def _quantize_blocks_nb(blocks, dct, inv_step, shift):
    n = blocks.shape[0]
    levels = np.empty((n, 8, 8), np.int64)
    tmp = np.empty((8, 8), np.int64)
    for b in range(n):
        for i in range(8):
            for j in range(8):
                acc = np.int64(0)
                for k in range(8):
                    acc += dct[i, k] * blocks[b, k, j]
                tmp[i, j] = acc
        for i in range(8):
            for j in range(8):
                acc = np.int64(0)
                for k in range(8):
                    acc += tmp[i, k] * dct[j, k]
                if i == 0 and j == 0:
                    levels[b, i, j] = _round_shift_nb(acc, 2 * 15)
                else:
                    mag = acc if acc >= 0 else -acc
                    lv = (mag * inv_step + (np.int64(1) << (shift - 1))) >> shift
                    levels[b, i, j] = lv if acc >= 0 else -lv
    return levels


def _round_shift_np(v, sh):
    half = np.int64(1) << (sh - 1)
    mag = (np.abs(v) + half) >> sh
    return np.where(v >= 0, mag, -mag)


def _quantize_blocks_np(blocks, dct, inv_step, shift):
    y = np.matmul(np.matmul(dct, blocks), dct.T)
    mag = (np.abs(y) * inv_step + (np.int64(1) << (shift - 1))) >> shift
    levels = np.where(y >= 0, mag, -mag)
    levels[:, 0, 0] = _round_shift_np(y[:, 0, 0], 2 * DCT_SHIFT)
    return levels


@njit
def _reconstruct_blocks_nb(levels, dct, deq, max_value):
    n = levels.shape[0]
    out = np.empty((n, 8, 8), np.int64)
    coef = np.empty((8, 8), np.int64)
    tmp = np.empty((8, 8), np.int64)
    for b in range(n):
        for i in range(8):
            for j in range(8):
                coef[i, j] = levels[b, i, j] * deq
        coef[0, 0] = levels[b, 0, 0] << 7
        for i in range(8):
            for j in range(8):
                acc = np.int64(0)
                for k in range(8):
                    acc += dct[k, i] * coef[k, j]
                tmp[i, j] = acc
        for i in range(8):
            for j in range(8):
                acc = np.int64(0)
                for k in range(8):
                    acc += tmp[i, k] * dct[k, j]
                v = (acc + (np.int64(1) << 36)) >> 37
                if v < 0:
                    v = 0
                elif v > max_value:
                    v = max_value
                out[b, i, j] = v
    return out


def _reconstruct_blocks_np(levels, dct, deq, max_value):
    coef = levels * deq
    coef[:, 0, 0] = levels[:, 0, 0] << 7
    z = np.matmul(np.matmul(dct.T, coef), dct)
    return np.clip((z + (np.int64(1) << 36)) >> 37, 0, max_value)


# ---------------------------------------------------------------------------
# Exp-Golomb bit packing
# ---------------------------------------------------------------------------


@njit
def _pack_ue_nb(codes):
    total = 0
    for c in codes:
        v = c + 1
        nbits = 0
        while v > 1:
            v >>= 1
            nbits += 1
        total += 2 * nbits + 1
    out = np.zeros((total + 7) // 8, np.uint8)
    pos = 0
    for c in codes:
        v = c + 1
        nbits = 0
        t = v
        while t > 1:
            t >>= 1
            nbits += 1
        pos += nbits
        for b in range(nbits, -1, -1):
            if (v >> b) & 1:
                out[pos >> 3] |= np.uint8(0x80 >> (pos & 7))
            pos += 1
    return out


def _pack_ue_np(codes):
    codes = np.asarray(codes, np.int64)
    if codes.size == 0:
        return np.zeros(0, np.uint8)
    value = codes + 1
    nbits = np.frexp(value.astype(np.float64))[1].astype(np.int64) - 1
    length = 2 * nbits + 1
    end = np.cumsum(length)
    total = int(end[-1])
    owner = np.repeat(np.arange(codes.size), length)
    # bit position counted from the end of each codeword
    from_end = end[owner] - 1 - np.arange(total)
    bits = ((value[owner] >> from_end) & 1).astype(np.uint8)
    return np.packbits(bits)


def _read_ue(buf, pos):
    limit = len(buf) * 8
    zeros = 0
    while pos < limit and not (buf[pos >> 3] >> (7 - (pos & 7))) & 1:
        zeros += 1
        pos += 1
    if pos + zeros >= limit:
        raise IndexError("bitstream exhausted")
    pos += 1
    v = 1
    for _ in range(zeros):
        v = (v << 1) | (int(buf[pos >> 3]) >> (7 - (pos & 7))) & 1
        pos += 1
    return v - 1, pos


def _read_se(buf, pos):
    c, pos = _read_ue(buf, pos)
    if c & 1:
        return (c + 1) >> 1, pos
    return -(c >> 1), pos


def _unpack_blocks(buf, pos, n_blocks, zigzag, lossless):
    """Inverse of the symbol layout built by :func:`rdbench.mockcodec.block_symbols`."""
    # bytes indexing yields Python ints; numpy uint8 scalars would wrap on shifts
    buf = bytes(np.asarray(buf, np.uint8))
    levels = np.zeros((n_blocks, 64), np.int64)
    residual = np.zeros((n_blocks, 64), np.int64)
    dc = 0
    for b in range(n_blocks):
        n_ac, pos = _read_ue(buf, pos)
        diff, pos = _read_se(buf, pos)
        dc += diff
        levels[b, 0] = dc
        for k in range(1, n_ac + 1):
            lv, pos = _read_se(buf, pos)
            levels[b, zigzag[k]] = lv
    if lossless:
        for b in range(n_blocks):
            for k in range(64):
                r, pos = _read_se(buf, pos)
                residual[b, k] = r
    return levels, residual, pos


_read_ue_nb = njit(_read_ue)


@njit
def _read_se_nb(buf, pos):
    c, pos = _read_ue_nb(buf, pos)
    if c & 1:
        return (c + 1) >> 1, pos
    return -(c >> 1), pos


@njit
def _unpack_blocks_nb(buf, pos, n_blocks, zigzag, lossless):
    levels = np.zeros((n_blocks, 64), np.int64)
    residual = np.zeros((n_blocks, 64), np.int64)
    dc = 0
    for b in range(n_blocks):
        n_ac, pos = _read_ue_nb(buf, pos)
        diff, pos = _read_se_nb(buf, pos)
        dc += diff
        levels[b, 0] = dc
        for k in range(1, n_ac + 1):
            lv, pos = _read_se_nb(buf, pos)
            levels[b, zigzag[k]] = lv
    if lossless:
        for b in range(n_blocks):
            for k in range(64):
                r, pos = _read_se_nb(buf, pos)
                residual[b, k] = r
    return levels, residual, pos


# name -> (numba, numpy); used by tests and the backend benchmark
VARIANTS = {
    "filter_rows": (_filter_rows_nb, _filter_rows_np),
    "filter_cols": (_filter_cols_nb, _filter_cols_np),
    "quantize_blocks": (_quantize_blocks_nb, _quantize_blocks_np),
    "reconstruct_blocks": (_reconstruct_blocks_nb, _reconstruct_blocks_np),
    "pack_ue": (_pack_ue_nb, _pack_ue_np),
    "unpack_blocks": (_unpack_blocks_nb, _unpack_blocks),
}

_pick = 0 if USE_NUMBA else 1
filter_rows = VARIANTS["filter_rows"][_pick]
filter_cols = VARIANTS["filter_cols"][_pick]
quantize_blocks = VARIANTS["quantize_blocks"][_pick]
reconstruct_blocks = VARIANTS["reconstruct_blocks"][_pick]
pack_ue = VARIANTS["pack_ue"][_pick]
unpack_blocks = VARIANTS["unpack_blocks"][_pick]
