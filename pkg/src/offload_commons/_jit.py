"""numba switch.

Kernels are compiled with ``numba.njit`` when numba is importable and the
environment variable ``OFFLOAD_COMMONS_NO_JIT`` is unset (or ``0``).
Otherwise the pure-numpy fallback path is used.
"""

from __future__ import annotations

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a soft dependency
    numba = None

HAVE_NUMBA = numba is not None


def jit_disabled_by_env() -> bool:
    return os.environ.get("OFFLOAD_COMMONS_NO_JIT", "").strip().lower() not in ("", "0", "false", "no")


def default_backend() -> str:
    if HAVE_NUMBA and not jit_disabled_by_env():
        return "numba"
    return "numpy"


def njit(f):
    """Compile ``f`` lazily when numba exists; return it unchanged otherwise.

    fastmath stays off so results match the numpy path bit for bit.
    """
    if not HAVE_NUMBA:
        return f
    return numba.njit(cache=False, fastmath=False)(f)
