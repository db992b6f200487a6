"""Kernel backend selection.

Hot inner loops live in :mod:`sephydro.kernels` and are JIT-compiled with
numba by default.  Setting the environment variable ``SEPHYDRO_NUMBA=0``
(or running without numba installed) selects a pure-Python/numpy fallback
that executes the *same* source, so results are bit-identical between the
two paths, just slower.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but keep the shim
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("SEPHYDRO_NUMBA", "1") != "0"


def maybe_njit(**kwargs):
    """Return numba.njit(**kwargs) or a no-op decorator per backend selection."""
    if USE_NUMBA:
        return numba.njit(**kwargs)

    def passthrough(f):
        return f

    return passthrough


def backend_name():
    return "numba" if USE_NUMBA else "python"
