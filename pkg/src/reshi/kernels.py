"""Selects the compiled tree kernels when available, the numpy fallback otherwise.

Set ``RESHI_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("RESHI_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

best_split = _impl.best_split
predict_batch = _impl.predict_batch
