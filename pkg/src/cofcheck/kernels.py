"""Select the compiled graph kernels when available, else the pure-Python ones.

Set ``COFCHECK_PURE=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("COFCHECK_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

explore = _impl.explore
scc = _impl.scc
backward_reach = _impl.backward_reach

__all__ = ["BACKEND", "explore", "scc", "backward_reach"]
