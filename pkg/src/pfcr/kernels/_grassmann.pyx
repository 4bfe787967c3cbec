# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernel for the Grassmann ascent.

Implements f(S) = log|S'AS| + log|S'BS|, its Euclidean gradient, and the full
first-order descent loop (tangent projection, Gram-Schmidt QR retraction with
positive diagonal, backtracking line search). Sizes are small (p up to a few
hundred, d small), so plain O(p^2 d) loops beat the per-call overhead of
dispatching numpy from Python inside the multistart/replication loops.

kernels.pure implements the same contract in numpy; agreement between the two
backends is unit-tested.
"""

import numpy as np

from libc.math cimport log, sqrt, INFINITY
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy


cdef int _cholesky(double* M, int d) nogil:
    # In-place lower Cholesky of a d x d row-major symmetric matrix.
    cdef int i, j, k
    cdef double s
    for j in range(d):
        s = M[j * d + j]
        for k in range(j):
            s -= M[j * d + k] * M[j * d + k]
        if s <= 0.0:
            return 1
        M[j * d + j] = sqrt(s)
        for i in range(j + 1, d):
            s = M[i * d + j]
            for k in range(j):
                s -= M[i * d + k] * M[j * d + k]
            M[i * d + j] = s / M[j * d + j]
    return 0


cdef void _chol_solve_vec(double* L, double* v, int d) nogil:
    # Solve (L L') x = v in place using the lower factor L.
    cdef int i, k
    cdef double s
    for i in range(d):
        s = v[i]
        for k in range(i):
            s -= L[i * d + k] * v[k]
        v[i] = s / L[i * d + i]
    for i in range(d - 1, -1, -1):
        s = v[i]
        for k in range(i + 1, d):
            s -= L[k * d + i] * v[k]
        v[i] = s / L[i * d + i]


cdef double _term_value(double* S, const double* M, double* MS, double* G,
                        int p, int d) nogil:
    # log|S'MS| via Cholesky; MS and G are scratch. INFINITY on failure.
    cdef int i, j, k
    cdef double s, logdet
    for i in range(p):
        for j in range(d):
            s = 0.0
            for k in range(p):
                s += M[i * p + k] * S[k * d + j]
            MS[i * d + j] = s
    for i in range(d):
        for j in range(d):
            s = 0.0
            for k in range(p):
                s += S[k * d + i] * MS[k * d + j]
            G[i * d + j] = s
    if _cholesky(G, d):
        return INFINITY
    logdet = 0.0
    for i in range(d):
        logdet += 2.0 * log(G[i * d + i])
    return logdet


cdef double _term_grad(double* S, const double* M, double* grad,
                       double* MS, double* G, double* v, int p, int d) nogil:
    # As _term_value but also accumulates 2 * MS (S'MS)^{-1} into grad.
    cdef int i, j
    cdef double logdet = _term_value(S, M, MS, G, p, d)
    if logdet == INFINITY:
        return INFINITY
    for i in range(p):
        for j in range(d):
            v[j] = MS[i * d + j]
        _chol_solve_vec(G, v, d)
        for j in range(d):
            grad[i * d + j] += 2.0 * v[j]
    return logdet


cdef double _value(double* S, const double* A, const double* B,
                   double* MS, double* G, int p, int d) nogil:
    cdef double fa = _term_value(S, A, MS, G, p, d)
    if fa == INFINITY:
        return INFINITY
    cdef double fb = _term_value(S, B, MS, G, p, d)
    if fb == INFINITY:
        return INFINITY
    return fa + fb


cdef double _value_grad(double* S, const double* A, const double* B, double* grad,
                        double* MS, double* G, double* v, int p, int d) nogil:
    cdef int i
    for i in range(p * d):
        grad[i] = 0.0
    cdef double fa = _term_grad(S, A, grad, MS, G, v, p, d)
    if fa == INFINITY:
        return INFINITY
    cdef double fb = _term_grad(S, B, grad, MS, G, v, p, d)
    if fb == INFINITY:
        return INFINITY
    return fa + fb


cdef int _mgs_retract(double* S, int p, int d) nogil:
    # In-place modified Gram-Schmidt; positive diagonal by construction.
    cdef int i, j, k, rep
    cdef double s, nrm
    for j in range(d):
        for rep in range(2):  # two passes for numerical orthogonality
            for k in range(j):
                s = 0.0
                for i in range(p):
                    s += S[i * d + k] * S[i * d + j]
                for i in range(p):
                    S[i * d + j] -= s * S[i * d + k]
        nrm = 0.0
        for i in range(p):
            nrm += S[i * d + j] * S[i * d + j]
        nrm = sqrt(nrm)
        if nrm < 1e-150:
            return 1
        for i in range(p):
            S[i * d + j] /= nrm
    return 0


def value_and_grad(double[:, ::1] S, double[:, ::1] A, double[:, ::1] B,
                   double[:, ::1] grad):
    """Fill grad with the Euclidean gradient of f at S and return f (or +inf)."""
    cdef int p = S.shape[0]
    cdef int d = S.shape[1]
    cdef double* MS = <double*> malloc((p * d + d * d + d) * sizeof(double))
    if MS == NULL:
        raise MemoryError()
    cdef double* G = MS + p * d
    cdef double* v = G + d * d
    cdef double f
    try:
        with nogil:
            f = _value_grad(&S[0, 0], &A[0, 0], &B[0, 0], &grad[0, 0],
                            MS, G, v, p, d)
        return f
    finally:
        free(MS)


def value_only(double[:, ::1] S, double[:, ::1] A, double[:, ::1] B):
    """f(S) without the gradient, +inf on factorization failure."""
    cdef int p = S.shape[0]
    cdef int d = S.shape[1]
    cdef double* MS = <double*> malloc((p * d + d * d) * sizeof(double))
    if MS == NULL:
        raise MemoryError()
    cdef double* G = MS + p * d
    cdef double f
    try:
        with nogil:
            f = _value(&S[0, 0], &A[0, 0], &B[0, 0], MS, G, p, d)
        return f
    finally:
        free(MS)


def ascend(double[:, ::1] S0, double[:, ::1] A, double[:, ::1] B,
           int max_iters, double grad_tol, double initial_step,
           double shrink, double sufficient_decrease):
    """Full descent loop from S0; returns (S, f, converged)."""
    cdef int p = S0.shape[0]
    cdef int d = S0.shape[1]
    cdef int nd = p * d
    S_arr = np.array(S0, dtype=np.float64, order="C")
    cdef double[:, ::1] Smv = S_arr
    cdef double* S = &Smv[0, 0]
    cdef double* buf = <double*> malloc((3 * nd + d * d + d * d + d) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* grad = buf
    cdef double* G = buf + nd          # tangent direction
    cdef double* St = buf + 2 * nd     # trial point
    cdef double* T = buf + 3 * nd      # d x d scratch (S'grad)
    cdef double* Gd = T + d * d        # d x d scratch for factorizations
    cdef double* v = Gd + d * d
    cdef double f, ft, gnorm2, t, t_prev, s
    cdef int it, i, j, k, ls, accepted, converged = 0
    cdef const double* Ap = &A[0, 0]
    cdef const double* Bp = &B[0, 0]
    # MS scratch shares St's backing only when sizes match, so allocate its own
    cdef double* MS = <double*> malloc(nd * sizeof(double))
    if MS == NULL:
        free(buf)
        raise MemoryError()
    try:
        with nogil:
            f = _value_grad(S, Ap, Bp, grad, MS, Gd, v, p, d)
            if f != INFINITY:
                t_prev = initial_step
                for it in range(max_iters):
                    # G = grad - S (S'grad)
                    for i in range(d):
                        for j in range(d):
                            s = 0.0
                            for k in range(p):
                                s += S[k * d + i] * grad[k * d + j]
                            T[i * d + j] = s
                    gnorm2 = 0.0
                    for i in range(p):
                        for j in range(d):
                            s = grad[i * d + j]
                            for k in range(d):
                                s -= S[i * d + k] * T[k * d + j]
                            G[i * d + j] = s
                            gnorm2 += s * s
                    if gnorm2 < grad_tol * grad_tol:
                        converged = 1
                        break
                    t = t_prev / (shrink * shrink)
                    if t > initial_step:
                        t = initial_step
                    accepted = 0
                    for ls in range(60):
                        for i in range(nd):
                            St[i] = S[i] - t * G[i]
                        if _mgs_retract(St, p, d) == 0:
                            ft = _value(St, Ap, Bp, MS, Gd, p, d)
                            # strict decrease guards against accepting
                            # zero-progress steps once c*t*gnorm2 underflows
                            if ft < f and ft <= f - sufficient_decrease * t * gnorm2:
                                accepted = 1
                                break
                        t *= shrink
                    if accepted == 0:
                        converged = 1
                        break
                    t_prev = t
                    memcpy(S, St, nd * sizeof(double))
                    f = _value_grad(S, Ap, Bp, grad, MS, Gd, v, p, d)
        return S_arr, f, bool(converged)
    finally:
        free(buf)
        free(MS)
