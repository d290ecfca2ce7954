"""Backend selection for the hot kernels.

Every kernel in :mod:`eastlab.kernels` exists twice: a numba ``@njit``
version and a pure-numpy version.  The numba path is used when numba is
importable and ``EASTLAB_NUMBA`` is not set to ``0``/``false``/``off``.
Tests and the benchmark flip the backend at runtime with :func:`backend`.
"""
from __future__ import annotations

import contextlib
import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_FALSY = {"0", "false", "off", "no"}

_state = {
    "numba": HAS_NUMBA and os.environ.get("EASTLAB_NUMBA", "1").strip().lower() not in _FALSY
}


def njit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged."""
    if not HAS_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def numba_enabled() -> bool:
    return _state["numba"]


def set_numba(enabled: bool) -> None:
    if enabled and not HAS_NUMBA:
        raise RuntimeError("numba is not installed")
    _state["numba"] = bool(enabled)


@contextlib.contextmanager
def backend(name: str):
    """Temporarily select ``"numba"`` or ``"numpy"`` kernels."""
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    old = _state["numba"]
    set_numba(name == "numba")
    try:
        yield
    finally:
        _state["numba"] = old
