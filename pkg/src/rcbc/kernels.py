"""Hot-loop dispatch: the compiled extension when importable, numpy otherwise.

Set ``RCBC_PURE_PYTHON=1`` to force the numpy implementation.
"""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("RCBC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _pykernels

eval_monomials = _impl.eval_monomials
closed_loop_dt = _impl.closed_loop_dt
closed_loop_ct = _impl.closed_loop_ct

__all__ = ["BACKEND", "eval_monomials", "closed_loop_dt", "closed_loop_ct"]
