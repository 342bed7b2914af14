"""Kernel backend selection.

Hot loops are compiled with numba when it is importable. Setting
``EDGESYNC_DISABLE_NUMBA=1`` forces the pure-numpy path, which produces
the same per-element accumulation order.
"""

import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_DISABLED = os.environ.get("EDGESYNC_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

_backend = "numba" if HAS_NUMBA and not _DISABLED else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is present, identity decorator otherwise."""
    if HAS_NUMBA:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]):
        return args[0]
    return lambda f: f


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    """Switch the kernel backend at runtime (used by the benchmark)."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


def use_numba() -> bool:
    return _backend == "numba"
