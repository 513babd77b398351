"""Backend selection for the hot kernels.

Every kernel ships twice: a numba ``@njit`` loop and a pure-numpy path.
``IMMUNESOM_BACKEND=numpy`` forces the fallback; the default is numba when
it imports cleanly.
"""
from __future__ import annotations

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

HAS_NUMBA = numba is not None

_VALID = ("numba", "numpy")


def default_backend() -> str:
    requested = os.environ.get("IMMUNESOM_BACKEND", "").strip().lower()
    if requested and requested not in _VALID:
        raise ValueError(f"IMMUNESOM_BACKEND must be one of {_VALID}, got {requested!r}")
    if requested == "numpy" or not HAS_NUMBA:
        return "numpy"
    return "numba"


def resolve(backend: str | None) -> str:
    if backend is None:
        return default_backend()
    if backend not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}, got {backend!r}")
    if backend == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


def njit(fn):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    if HAS_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn
