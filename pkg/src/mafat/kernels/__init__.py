"""Convolution and max-pool kernels over output sub-regions.

The compiled extension is used when it is importable; otherwise (or when
``MAFAT_PURE_PYTHON=1``) the NumPy implementation is used. Both produce
bit-identical float32 results.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("MAFAT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

conv2d_region = _impl.conv2d_region
maxpool_region = _impl.maxpool_region


def backends():
    """Mapping of available backend names to their kernel modules."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
