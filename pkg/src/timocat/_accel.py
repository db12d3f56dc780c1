"""Backend selection for the compiled kernels.

Set ``TIMOCAT_DISABLE_NUMBA=1`` to force the pure-numpy path.  The flag is
read once at import time.
"""

import os

_FALSY = {"", "0", "false", "no", "off"}

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

HAVE_NUMBA = numba is not None
DISABLED = os.environ.get("TIMOCAT_DISABLE_NUMBA", "").strip().lower() not in _FALSY
USE_NUMBA = HAVE_NUMBA and not DISABLED


def njit(func):
    """Compile ``func`` with numba when available, else return it unchanged."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
