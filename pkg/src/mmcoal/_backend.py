"""
Selects the kernel implementation at import time.

The compiled extension is used when it is importable, unless the
environment variable ``MMCOAL_PURE_PYTHON`` is set to a non-empty value
other than ``0``.
"""
import os

from . import _pykernels

if os.environ.get("MMCOAL_PURE_PYTHON", "") not in ("", "0"):
    kernels = _pykernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:  # pragma: no cover - depends on the build
        kernels = _pykernels

BACKEND = "compiled" if kernels is not _pykernels else "python"
