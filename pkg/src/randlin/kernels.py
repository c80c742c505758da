"""Hot-loop kernels: compiled extension when built, NumPy otherwise.

Set ``RANDLIN_PURE=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
if os.environ.get("RANDLIN_PURE", "") != "1":
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

qr_growth = _impl.qr_growth
affine_forward = _impl.affine_forward
affine_backward = _impl.affine_backward
