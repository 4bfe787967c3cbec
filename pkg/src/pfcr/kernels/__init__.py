"""Backend selection for the Grassmann-ascent hot kernel.

The compiled extension is used when available; set PFCR_PURE=1 to force the
numpy fallback (useful for debugging and for the backend benchmark).
"""

import os

import numpy as np

from . import pure

if os.environ.get("PFCR_PURE"):
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _grassmann as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = pure
        BACKEND = "pure"


def value_and_grad(S, A, B, grad_out):
    """f(S) = log|S'AS| + log|S'BS| and its Euclidean gradient (into grad_out)."""
    return _impl.value_and_grad(S, A, B, grad_out)


def value_only(S, A, B):
    return _impl.value_only(S, A, B)


def ascend(S0, A, B, max_iters, grad_tol, initial_step, shrink,
           sufficient_decrease):
    """Backtracking Grassmann descent from S0; returns (S, f, converged)."""
    return _impl.ascend(S0, A, B, max_iters, grad_tol, initial_step, shrink,
                        sufficient_decrease)


def ascontiguous(M):
    return np.ascontiguousarray(M, dtype=float)
