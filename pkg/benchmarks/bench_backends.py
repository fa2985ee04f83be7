"""Compare the numba and numpy kernel backends on representative inputs.

    python benchmarks/bench_backends.py [--repeat N] [--size WxH]

Each kernel is run once untimed (JIT warm-up), then timed ``--repeat``
times; the best time is reported.  Outputs are checked for equality.
"""

import argparse
import time

import numpy as np

from rdbench import kernels, mockcodec
from rdbench._accel import HAS_NUMBA
from rdbench.resample import LANCZOS3, tap_table


def inputs(width, height, seed=0):
    rng = np.random.default_rng(seed)
    plane = rng.integers(0, 1024, (height, width)).astype(np.float64)
    idx_h, w_h = tap_table(width, width * 2, LANCZOS3)
    idx_v, w_v = tap_table(height, height * 2, LANCZOS3)
    blocks, _ = mockcodec._blocks(rng.integers(0, 1024, (height, width)))
    inv_step, shift, deq = kernels.quant_params(32)
    levels = kernels._quantize_blocks_np(blocks, kernels.DCT, inv_step, shift)
    codes = mockcodec.block_symbols(levels)
    packed = kernels._pack_ue_np(codes)
    return {
        "filter_rows": (plane, idx_h, w_h),
        "filter_cols": (plane, idx_v, w_v),
        "quantize_blocks": (blocks, kernels.DCT, inv_step, shift),
        "reconstruct_blocks": (levels, kernels.DCT, deq, 1023),
        "pack_ue": (codes,),
        "unpack_blocks": (packed, 0, len(blocks), kernels.ZIGZAG, False),
    }


def best_time(fn, args, repeat):
    fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", default="512x256")
    args = ap.parse_args()
    width, height = (int(v) for v in args.size.split("x"))
    if not HAS_NUMBA:
        print("numba is not installed; only the numpy backend can be timed")
    data = inputs(width, height)
    print(f"{'kernel':<20}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}  equal")
    for name, (nb, np_fn) in kernels.VARIANTS.items():
        t_np, out_np = best_time(np_fn, data[name], args.repeat)
        if HAS_NUMBA:
            t_nb, out_nb = best_time(nb, data[name], args.repeat)
            print(f"{name:<20}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>10.1f}  {same(out_nb, out_np)}")
        else:
            print(f"{name:<20}{t_np * 1e3:>12.2f}{'-':>12}{'-':>10}  -")


if __name__ == "__main__":
    main()
