"""Pick the Laguerre kernel backend at import.

The compiled module is used when it imports; ``SUBLAP_BACKEND=python``
forces the numpy fallback.
"""
import os

from . import _pykernels

if os.environ.get("SUBLAP_BACKEND", "").lower() in ("python", "numpy", "py"):
    kernels = _pykernels
    NAME = "python"
else:
    try:
        from . import _ckernels as kernels  # type: ignore[attr-defined]

        NAME = "cython"
    except ImportError:  # extension not built
        kernels = _pykernels
        NAME = "python"

BACKENDS = {"python": _pykernels}
if NAME == "cython":
    BACKENDS["cython"] = kernels
