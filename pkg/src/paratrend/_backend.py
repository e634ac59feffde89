"""Kernel backend selection.

The compiled module is used when it was built and ``PARATREND_PURE_PYTHON``
is unset (or ``0``); otherwise the numpy implementations are used. Both expose
the same three functions with the same semantics.
"""

from __future__ import annotations

import os

from . import _kernels_py

_force_python = os.environ.get("PARATREND_PURE_PYTHON", "0") not in ("", "0")

compiled = None
if not _force_python:
    try:
        from . import _ckernels as compiled  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled = None

BACKEND = "cython" if compiled is not None else "python"
_impl = compiled if compiled is not None else _kernels_py

local_linear_weights = _impl.local_linear_weights
lagged_products = _impl.lagged_products
ma_filter = _impl.ma_filter

__all__ = ["BACKEND", "local_linear_weights", "lagged_products", "ma_filter"]
