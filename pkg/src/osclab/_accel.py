"""Backend selection for the hot lattice kernels.

Set ``OSCLAB_BACKEND=numpy`` to force the pure-numpy code paths; the
default uses numba when it imports cleanly.
"""

import os

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

BACKEND = os.environ.get("OSCLAB_BACKEND", "numba" if HAS_NUMBA else "numpy").lower()
if BACKEND not in ("numba", "numpy"):
    raise ImportError(f"OSCLAB_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}")
USE_NUMBA = HAS_NUMBA and BACKEND == "numba"


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAS_NUMBA:
        return numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda f: f


WORKERS = 1


def set_workers(n):
    """Default pool size for the chunked random-trial samplers.

    The lattice kernels are serial, so numba's own thread pool is left alone.
    """
    global WORKERS
    WORKERS = max(1, int(n))
