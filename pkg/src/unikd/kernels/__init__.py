"""Kernel backend selection.

Two interchangeable backends implement the hot embedding-geometry kernels:
`reference` (pure numpy, always available) and `_fast` (Cython extension,
present when the package was built with a compiler). The active backend is
chosen once at import from the UNIKD_KERNEL_BACKEND environment variable:

    auto    prefer the compiled extension, fall back to numpy (default)
    cython  require the extension; raise if it was not built
    python  force the numpy reference implementation

Tests may switch backends at runtime with `set_backend`.
"""

from __future__ import annotations

import os
from types import ModuleType

from ..errors import ConfigError
from . import reference

try:
    from . import _fast
except ImportError:
    _fast = None

_BACKENDS: dict[str, ModuleType | None] = {"python": reference, "cython": _fast}


def available_backends() -> tuple[str, ...]:
    """Names of the backends importable in this installation."""
    return tuple(name for name, mod in _BACKENDS.items() if mod is not None)


def select_backend(name: str | None = None) -> ModuleType:
    """Resolve a backend name ('auto' honors the preference order)."""
    if name is None:
        name = os.environ.get("UNIKD_KERNEL_BACKEND", "auto")
    if name == "auto":
        return _fast if _fast is not None else reference
    if name not in _BACKENDS:
        raise ConfigError(
            f"unknown kernel backend {name!r}; choose from auto, cython, python"
        )
    mod = _BACKENDS[name]
    if mod is None:
        raise ConfigError(
            f"kernel backend {name!r} requested but the extension is not built"
        )
    return mod


active: ModuleType = select_backend()


def set_backend(name: str) -> ModuleType:
    """Switch the process-wide backend; returns the newly active module."""
    global active
    active = select_backend(name)
    return active


def backend_name() -> str:
    """Name of the currently active backend."""
    return "cython" if active is _fast and _fast is not None else "python"
