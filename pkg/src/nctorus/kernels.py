"""Backend selection for the sparse twisted-convolution kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``NCT_PURE=1`` to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("NCT_PURE", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _kernels_py
        BACKEND = "python"

bilinear_form = _impl.bilinear_form
twisted_products = _impl.twisted_products

__all__ = ["BACKEND", "bilinear_form", "twisted_products"]
