"""Kernel backend selection: numba-compiled hot loops with a pure-numpy fallback.

The backend is chosen once at import time from the ``BLOCKNAS_BACKEND``
environment variable:

* ``auto`` (default) - use numba when importable, else numpy
* ``numba``          - require numba, fail loudly if missing
* ``numpy``          - force the pure-numpy fallback

Both paths implement identical arithmetic (same operation order), so results
agree bit-for-bit; ``benchmarks/bench_backends.py`` compares their speed.
"""

import os

_FLAG = os.environ.get("BLOCKNAS_BACKEND", "auto").lower()
if _FLAG not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"BLOCKNAS_BACKEND must be auto, numba or numpy, got {_FLAG!r}"
    )

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via BLOCKNAS_BACKEND=numpy
    numba = None
    HAS_NUMBA = False

if _FLAG == "numba" and not HAS_NUMBA:
    raise RuntimeError("BLOCKNAS_BACKEND=numba but numba is not importable")

USE_NUMBA = HAS_NUMBA and _FLAG != "numpy"

BACKEND_NAME = "numba" if USE_NUMBA else "numpy"


def maybe_njit(func):
    """Compile ``func`` with numba when the numba backend is active.

    With the numpy backend this is the identity, so the decorated function
    must be valid plain Python over numpy arrays.
    """
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    return func
