# Kernel backend selection.  The numba backend is the default when numba is
# importable; set COVLINK_BACKEND=numpy (or call set_backend) to force the
# pure-numpy path, e.g. on platforms without a working JIT.

import os

from . import _kernels_np

_BACKENDS = {"numpy": _kernels_np}

try:
    from . import _kernels_nb

    _BACKENDS["numba"] = _kernels_nb
except ImportError:  # pragma: no cover - numba is an install-time dependency
    _kernels_nb = None


def _initial_backend():
    name = os.environ.get("COVLINK_BACKEND", "").strip().lower()
    if name:
        if name not in _BACKENDS:
            raise ValueError(
                f"COVLINK_BACKEND={name!r} not available; choose from {sorted(_BACKENDS)}"
            )
        return name
    return "numba" if "numba" in _BACKENDS else "numpy"


_active = _initial_backend()


def active_backend():
    """Name of the backend currently serving kernel calls."""
    return _active


def available_backends():
    return tuple(sorted(_BACKENDS))


def set_backend(name):
    """Switch kernel backends at runtime; returns the previous name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(_BACKENDS)}")
    previous = _active
    _active = name
    return previous


def kernels(name=None):
    """The kernel module for ``name`` (default: the active backend)."""
    return _BACKENDS[name or _active]
