"""Hot-loop kernels with a compiled core and a numpy fallback.

The compiled extension (``_ckern``, built from Cython) is preferred when it
imports cleanly; otherwise the numpy implementations in ``pykern`` are used.
``STOCHINT_PURE=1`` in the environment forces the fallback.  Whichever
backend is selected, results are deterministic run to run.
"""

import os

from . import pykern

if os.environ.get("STOCHINT_PURE"):
    _impl = pykern
else:
    try:
        from . import _ckern as _impl
    except ImportError:
        _impl = pykern

BACKEND = _impl.BACKEND
phi_values = _impl.phi_values
reward_batch = _impl.reward_batch
best_stump = _impl.best_stump

__all__ = ["BACKEND", "phi_values", "reward_batch", "best_stump", "pykern"]
