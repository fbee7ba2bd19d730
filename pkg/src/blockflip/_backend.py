"""Select the kernel implementation at import time.

The compiled extension is used when it is importable, unless the
environment variable ``BLOCKFLIP_PURE_PYTHON`` is set to a non-empty value
other than ``0``.
"""

import os

from . import _kernels_py

_force_python = os.environ.get("BLOCKFLIP_PURE_PYTHON", "") not in ("", "0")

if _force_python:
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels_ext as kernels
    except ImportError:
        kernels = _kernels_py
        BACKEND = "python"
    else:
        BACKEND = "cython"

__all__ = ["BACKEND", "kernels"]
