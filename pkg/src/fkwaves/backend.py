"""Kernel backend selection.

Hot loops (lattice time stepping, profile residuals) exist twice: a numba
@njit version and a pure-numpy version.  The environment variable
FKWAVES_BACKEND picks one:

    FKWAVES_BACKEND=numba   force numba (ImportError if unavailable)
    FKWAVES_BACKEND=numpy   force the pure-numpy path
    FKWAVES_BACKEND=auto    numba when importable, numpy otherwise (default)

The choice is made once at import time.
"""

import os

_requested = os.environ.get("FKWAVES_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"FKWAVES_BACKEND must be one of auto|numba|numpy, got {_requested!r}"
    )

if _requested == "numpy":
    HAS_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        HAS_NUMBA = False

#: Name of the active backend ("numba" or "numpy").
BACKEND = "numba" if HAS_NUMBA else "numpy"


def use_numba():
    """True if hot kernels should go through the numba path."""
    return HAS_NUMBA
