"""Numba/numpy backend selection.

Hot kernels in this package exist twice: a scalar-loop version compiled
with numba's @njit, and a vectorized pure-numpy version. The environment
variable ``QPLAB_DISABLE_NUMBA=1`` forces the numpy path; it is also taken
automatically when numba is not importable. ``benchmarks/bench_backends.py``
compares the two.

Per-phase work is always laid out in a fixed array order and reduced in
that order, so results do not depend on the numba thread count.
"""

import os

# workqueue is always available and avoids the TBB version probe warning.
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

_DISABLED = os.environ.get("QPLAB_DISABLE_NUMBA", "").strip() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by QPLAB_DISABLE_NUMBA")
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:
    _numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """@njit that degrades to a no-op decorator on the numpy backend."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)

    def deco(func):
        return func

    if args and callable(args[0]):
        return args[0]
    return deco


def set_num_threads(n: int) -> None:
    if HAVE_NUMBA and n >= 1:
        try:
            _numba.set_num_threads(min(n, _numba.config.NUMBA_NUM_THREADS))
        except ValueError:
            pass


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
