"""Kernel backend selection.

The compiled extension ``panc._core`` is used when present; the NumPy
fallback is always available. Set PANC_KERNELS=compiled|fallback|auto to
override (``compiled`` fails loudly when the extension is missing).
"""

from __future__ import annotations

import os
from types import ModuleType

from . import fallback as _fallback


def load_backend(name: str = "auto") -> ModuleType:
    """Return the kernel module for `name` (auto, compiled, or fallback)."""
    if name not in ("auto", "compiled", "fallback"):
        raise ValueError(f"unknown kernel backend {name!r}")
    if name == "fallback":
        return _fallback
    try:
        from panc import _core
    except ImportError:
        if name == "compiled":
            raise
        return _fallback
    return _core


_active = load_backend(os.environ.get("PANC_KERNELS", "auto"))

BACKEND: str = _active.BACKEND
affinity_from_sims = _active.affinity_from_sims
topk_rows = _active.topk_rows
csr_matmat = _active.csr_matmat

__all__ = [
    "BACKEND",
    "affinity_from_sims",
    "csr_matmat",
    "load_backend",
    "topk_rows",
]
