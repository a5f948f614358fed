"""Selects the ray-traversal implementation at import time.

The compiled extension is preferred; the numpy fallback gives identical
results (same arithmetic, same tie-breaking) at lower speed. Override with
HYBRIDDOF_BACKEND=python|cython.
"""

import os

from . import kernels_py

_forced = os.environ.get("HYBRIDDOF_BACKEND", "").lower()

if _forced == "python":
    _impl = kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        _impl = kernels_py
        BACKEND = "python"


def resolve(impl=None):
    """Implementation module for an explicit choice (None = active)."""
    if impl is None:
        return _impl
    if impl == "python":
        return kernels_py
    if impl == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {impl!r}")


def intersect_batch(*args, impl=None):
    """Dispatch to the active (or an explicitly requested) implementation."""
    return resolve(impl).intersect_batch(*args)


def bilinear_gather(*args, impl=None):
    return resolve(impl).bilinear_gather(*args)


def available_backends():
    out = ["python"]
    try:
        from . import _kernels  # noqa: F401

        out.insert(0, "cython")
    except ImportError:
        pass
    return out
