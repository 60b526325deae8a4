"""Hot kernels with a compiled backend and a pure-Python fallback.

The compiled extension is used when it was built; setting the environment
variable ``SOFRVEM_PURE_PYTHON=1`` forces the fallback.  ``BACKEND`` names
the active implementation.
"""
import os

from . import _fallback

if os.environ.get("SOFRVEM_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

bspline_basis = _impl.bspline_basis
inclusion_sweep = _impl.inclusion_sweep

__all__ = ["BACKEND", "bspline_basis", "inclusion_sweep"]
