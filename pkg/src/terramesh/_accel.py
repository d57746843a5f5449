"""Backend selection for the hot kernels.

Set ``TERRAMESH_BACKEND=numpy`` to bypass numba and run the pure-numpy
implementations. The default is ``numba`` when it imports cleanly.
"""
import os

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False


def _requested_backend():
    name = os.environ.get("TERRAMESH_BACKEND", "numba").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"TERRAMESH_BACKEND must be 'numba' or 'numpy', got {name!r}")
    return name


BACKEND = _requested_backend() if HAS_NUMBA else "numpy"
USE_NUMBA = BACKEND == "numba"


def njit(fn=None, **kwargs):
    """``numba.njit`` when numba is available, identity otherwise."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if not HAS_NUMBA:
            return f
        return numba.njit(**kwargs)(f)

    return wrap(fn) if fn is not None else wrap


def pick(numba_impl, numpy_impl):
    """Return the implementation matching the active backend."""
    return numba_impl if USE_NUMBA else numpy_impl
