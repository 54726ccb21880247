"""Select the compiled kernel when available, else the NumPy fallback.

Set ``COLDDIPOLE_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
fill_kernel = _kernels_py.fill_kernel

if os.environ.get("COLDDIPOLE_BACKEND", "").lower() != "python":
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        fill_kernel = _kernels.fill_kernel


def backends() -> dict:
    """All importable kernel implementations keyed by name."""
    found = {"python": _kernels_py.fill_kernel}
    try:
        from . import _kernels
    except ImportError:
        return found
    found["cython"] = _kernels.fill_kernel
    return found
