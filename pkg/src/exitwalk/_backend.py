"""Kernel backend selection.

The compiled kernel is used when importable.  ``EXITWALK_BACKEND=python``
forces the numpy kernels; ``EXITWALK_BACKEND=cython`` makes a missing
extension an import error instead of a silent fallback.
"""
import os

_choice = os.environ.get("EXITWALK_BACKEND", "").strip().lower()

if _choice == "python":
    from . import _kernels_py as kernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        from . import _kernels_py as kernels
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
