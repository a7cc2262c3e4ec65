"""Hot kernels: compiled Cython core when built, numpy fallback otherwise.

Set ``QFREDKIN_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"

if os.environ.get("QFREDKIN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core
    except ImportError:
        _core = None
    else:
        BACKEND = "cython"
else:
    _core = None

if _core is not None:
    expand_subspace = _core.expand_subspace
    mle_rhor = _core.mle_rhor
else:
    expand_subspace = _fallback.expand_subspace
    mle_rhor = _fallback.mle_rhor

__all__ = ["BACKEND", "expand_subspace", "mle_rhor"]
