"""Hot kernels with a compiled core and a numpy fallback.

The compiled extension is used when it was built and ``GRRIDGE_PURE_PYTHON``
is unset; otherwise the pure-Python versions are used. ``BACKEND`` names the
active implementation.
"""

import os

import numpy as np

from . import _kernels_py

_impl = _kernels_py
BACKEND = "python"

if not os.environ.get("GRRIDGE_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        _impl = _ckernels
        BACKEND = "cython"


def pava(y, w, increasing=True):
    """Weighted least-squares isotonic fit by pool-adjacent-violators."""
    y = np.ascontiguousarray(y, dtype=float)
    w = np.ascontiguousarray(w, dtype=float)
    if y.shape != w.shape or y.ndim != 1:
        raise ValueError("y and w must be 1-d arrays of equal length")
    return _impl.pava(y, w, bool(increasing))


def group_gram(M, group_of, n_groups):
    """Per-group sums of row outer products: out[g] = M_g^T M_g."""
    M = np.ascontiguousarray(M, dtype=float)
    group_of = np.ascontiguousarray(group_of, dtype=np.intp)
    if M.ndim != 2 or group_of.shape != (M.shape[0],):
        raise ValueError("group_of must label every row of M")
    return _impl.group_gram(M, group_of, int(n_groups))


__all__ = ["BACKEND", "pava", "group_gram"]
