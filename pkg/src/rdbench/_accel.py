"""Backend selection for the hot numeric kernels.

Every kernel in :mod:`rdbench.kernels` exists twice: a numba ``@njit``
version and a pure-numpy version that performs the same arithmetic in the
same order, so both produce bit-identical results.  The numba path is used
when numba imports cleanly and ``RDBENCH_BACKEND`` is not ``numpy``.
"""

import logging
import os

logger = logging.getLogger(__name__)

ENV_FLAG = "RDBENCH_BACKEND"

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False


def requested_backend():
    value = os.environ.get(ENV_FLAG, "numba").strip().lower()
    if value not in ("numba", "numpy"):
        raise ValueError(f"{ENV_FLAG} must be 'numba' or 'numpy', got {value!r}")
    return value


USE_NUMBA = HAS_NUMBA and requested_backend() == "numba"
BACKEND = "numba" if USE_NUMBA else "numpy"

if requested_backend() == "numba" and not HAS_NUMBA:  # pragma: no cover
    logger.warning("numba not importable; falling back to numpy kernels")


def njit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged."""
    if not HAS_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)
