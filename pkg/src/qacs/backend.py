"""Kernel backend selection.

The compiled extension is preferred when importable; the vectorized numpy
kernel is the fallback. Both produce bit-identical outputs, so the choice
never affects results, only speed. Set ``QACS_KERNEL=python`` to force the
fallback (e.g. for benchmarking) or ``QACS_KERNEL=compiled`` to require
the extension.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built; numpy fallback is fully featured
    _compiled = None

HAVE_COMPILED = _compiled is not None


def available_kernels() -> dict:
    kernels = {"python": _kernels_py}
    if HAVE_COMPILED:
        kernels["compiled"] = _compiled
    return kernels


def get_kernel(name: str | None = None):
    """Resolve a kernel module by name, env var, or default preference."""
    if name is None:
        name = os.environ.get("QACS_KERNEL", "").strip().lower() or None
    if name is None:
        return _compiled if HAVE_COMPILED else _kernels_py
    kernels = available_kernels()
    if name not in kernels:
        raise ValueError(f"unknown kernel {name!r}; available: {sorted(kernels)}")
    return kernels[name]
