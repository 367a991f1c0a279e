"""Kernel backend selection.

The compiled extension is preferred; set ``TREDKIT_PURE_PYTHON=1`` to force
the NumPy fallback. Tests switch backends with :func:`use`.
"""
import os
from contextlib import contextmanager

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

if os.environ.get("TREDKIT_PURE_PYTHON", "") == "1" or _ckernels is None:
    kernels = _pykernels
else:
    kernels = _ckernels


def available():
    return sorted(_BACKENDS)


def name():
    return "compiled" if kernels is _ckernels and _ckernels is not None else "python"


def set_backend(backend):
    global kernels
    try:
        kernels = _BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {backend!r}; have {available()}")


@contextmanager
def use(backend):
    previous = kernels
    set_backend(backend)
    try:
        yield
    finally:
        globals()["kernels"] = previous
