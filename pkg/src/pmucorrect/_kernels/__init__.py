"""Hot numerical kernels with a compiled fast path.

The Cython extension is built on install; when it is missing (source
checkout without a build step) or when ``PMUCORRECT_PURE_PYTHON=1`` is set,
a pure-NumPy implementation with identical semantics is selected instead.
``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

from . import _pykernels

_BACKENDS = {"python": _pykernels}

if not os.environ.get("PMUCORRECT_PURE_PYTHON"):
    try:
        from . import _cykernels

        _BACKENDS["cython"] = _cykernels
    except ImportError:
        pass

_active = _BACKENDS.get("cython", _pykernels)


def active():
    """The kernel module currently in use."""
    return _active


def active_name() -> str:
    for name, mod in _BACKENDS.items():
        if mod is _active:
            return name
    raise RuntimeError("active kernel backend is not registered")


def available() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def use(name: str):
    """Switch the kernel backend ('python' or 'cython'); returns the module."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; built: {available()}")
    _active = _BACKENDS[name]
    return _active
