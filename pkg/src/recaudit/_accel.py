"""Backend selection for the hot kernels.

Set ``RECAUDIT_DISABLE_NUMBA=1`` to force the pure-numpy path. When numba is
not importable the numpy path is used silently.
"""
import os

_DISABLED = os.environ.get("RECAUDIT_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by RECAUDIT_DISABLE_NUMBA")
    from numba import njit as _njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - depends on environment
    _njit = None
    NUMBA_ENABLED = False


def njit(func):
    """Compile ``func`` with numba when enabled, else return it unchanged."""
    if NUMBA_ENABLED:
        return _njit(cache=True)(func)
    return func


def backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
