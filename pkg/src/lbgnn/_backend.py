"""Kernel backend selection.

``LBGNN_BACKEND=numpy`` forces the vectorized numpy kernels; the default is
``numba`` whenever numba imports. The choice is read once at import time.
"""

import os

BACKENDS = ("numba", "numpy")

try:
    import numba  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

_requested = os.environ.get("LBGNN_BACKEND", "numba").strip().lower()
if _requested not in BACKENDS:
    raise ImportError(f"LBGNN_BACKEND must be one of {BACKENDS}, got {_requested!r}")

BACKEND = "numba" if (_requested == "numba" and NUMBA_AVAILABLE) else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or a no-op when numba is missing."""
    kwargs.setdefault("cache", True)
    if NUMBA_AVAILABLE:
        import numba

        return numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda f: f
