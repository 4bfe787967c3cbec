"""Pure-numpy implementation of the Grassmann-ascent hot kernel.

f(S) = log|S'AS| + log|S'BS|, its Euclidean gradient
grad = 2 [ A S (S'AS)^{-1} + B S (S'BS)^{-1} ], and the full descent loop
(tangent projection, QR retraction with positive diagonal, backtracking line
search). Mirrors the contract of the compiled backend in _grassmann.pyx.

Value functions return +inf (gradient contents undefined) when a restricted
matrix fails its Cholesky factorization, so line searches can reject the
trial point cheaply.
"""

import numpy as np


def _term(S, M, grad_out):
    MS = M @ S
    G = S.T @ MS
    G = (G + G.T) / 2.0
    try:
        L = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        return None
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    grad_out += 2.0 * np.linalg.solve(G, MS.T).T
    return logdet


def value_and_grad(S, A, B, grad_out):
    """Fill grad_out with the Euclidean gradient and return f(S), or +inf."""
    grad_out[:] = 0.0
    fa = _term(S, A, grad_out)
    if fa is None:
        return np.inf
    fb = _term(S, B, grad_out)
    if fb is None:
        return np.inf
    return fa + fb


def value_only(S, A, B):
    """f(S) without the gradient, +inf on factorization failure."""
    out = 0.0
    for M in (A, B):
        G = S.T @ (M @ S)
        G = (G + G.T) / 2.0
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            return np.inf
        out += 2.0 * float(np.sum(np.log(np.diag(L))))
    return out


def _qr_retract(M):
    Q, R = np.linalg.qr(M)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def ascend(S0, A, B, max_iters, grad_tol, initial_step, shrink,
           sufficient_decrease):
    """Full descent loop from S0; returns (S, f, converged)."""
    S = np.array(S0, dtype=float, order="C")
    grad = np.empty_like(S)
    f = value_and_grad(S, A, B, grad)
    if not np.isfinite(f):
        return S, f, False
    converged = False
    t_prev = initial_step
    for _ in range(max_iters):
        G = grad - S @ (S.T @ grad)
        gnorm2 = float(np.sum(G * G))
        if gnorm2 < grad_tol**2:
            converged = True
            break
        # warm-start the line search near the last accepted step
        t = min(initial_step, t_prev / shrink**2)
        accepted = False
        for _ in range(60):
            St = np.ascontiguousarray(_qr_retract(S - t * G))
            ft = value_only(St, A, B)
            # strict decrease guards against accepting zero-progress steps
            # once c*t*gnorm2 underflows below the ULP of f
            if ft < f and ft <= f - sufficient_decrease * t * gnorm2:
                accepted = True
                break
            t *= shrink
        if not accepted:
            # no descent at machine precision: treat the point as stationary
            converged = True
            break
        t_prev = t
        S = St
        f = value_and_grad(S, A, B, grad)
    return S, f, converged
