"""Hot kernels, compiled when the Cython extension is built.

Set ``ANTISYMRNN_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _pykernels

if os.environ.get("ANTISYMRNN_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

matmul_lr = _impl.matmul_lr
eigvals_real = _impl.eigvals_real
euler_portrait = _impl.euler_portrait

__all__ = ["BACKEND", "matmul_lr", "eigvals_real", "euler_portrait"]
