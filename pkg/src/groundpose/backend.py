"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy kernels
take over. Both expose identical functions, so callers go through
:func:`kernels` and never import either module directly.
"""

from __future__ import annotations

import contextlib
from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS: dict[str, ModuleType] = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_active = _BACKENDS.get("compiled", _pykernels)


def available() -> list[str]:
    return sorted(_BACKENDS)


def name() -> str:
    return "compiled" if _active is _ckernels and _ckernels is not None else "python"


def kernels() -> ModuleType:
    return _active


def get(backend: str) -> ModuleType:
    try:
        return _BACKENDS[backend]
    except KeyError:
        raise ValueError(
            f"backend {backend!r} is not available (have: {', '.join(available())})"
        ) from None


def set_backend(backend: str) -> None:
    global _active
    _active = get(backend)


@contextlib.contextmanager
def using(backend: str):
    """Temporarily switch the active backend (not thread-safe)."""
    global _active
    prev = _active
    _active = get(backend)
    try:
        yield _active
    finally:
        _active = prev
