"""Hot kernels with a compiled backend and a pure-Python fallback.

The compiled module is used when it imports; set FAIRBBR_PURE=1 to force the
fallback. Both backends are kept arithmetically identical.
"""

import os

from . import _pykernels

python_backend = _pykernels

if os.environ.get("FAIRBBR_PURE", "") not in ("", "0"):
    compiled_backend = None
else:
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend

BACKEND = "cython" if compiled_backend is not None else "python"

WindowedFilter = _active.WindowedFilter
gini_best_split = _active.gini_best_split
pegasos_epoch = _active.pegasos_epoch

__all__ = [
    "BACKEND",
    "WindowedFilter",
    "compiled_backend",
    "gini_best_split",
    "pegasos_epoch",
    "python_backend",
]
