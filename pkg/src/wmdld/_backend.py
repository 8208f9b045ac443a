"""Pick the compiled kernels when available.

Set ``WMDLD_BACKEND=python`` to force the NumPy fallback, or
``WMDLD_BACKEND=compiled`` to fail loudly when the extension is missing.
"""
import os

from . import _pykernels

_choice = os.environ.get("WMDLD_BACKEND", "auto").lower()

if _choice == "python":
    _compiled = None
else:
    try:
        from . import _kernels as _compiled
    except ImportError:
        if _choice == "compiled":
            raise
        _compiled = None

NAME = "compiled" if _compiled is not None else "python"
kernels = _compiled if _compiled is not None else _pykernels
