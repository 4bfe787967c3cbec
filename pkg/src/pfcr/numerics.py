"""Dense numerical kernels shared across the package.

Everything here is a pure function of its inputs: symmetric eigendecompositions
with a deterministic sign convention, positive-definite log-determinants,
chi-square tail probabilities via the regularized incomplete gamma function,
principal angles between subspaces, oblique (inner-product) projections, and
log-sum-exp.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SingularMatrixError


@dataclass
class Tolerances:
    """Default numerical tolerances; override fields programmatically if needed."""

    orthonormality: float = 1e-10
    eigen_residual: float = 1e-8
    chi2_abs: float = 1e-6
    projection_idempotence: float = 1e-10
    clamp: float = 1e-12


TOLERANCES = Tolerances()


def _check_finite(a, name):
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")


def symmetrize(S):
    """Return (S + S.T)/2 as a float array."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {S.shape}")
    return (S + S.T) / 2.0


def canonicalize_signs(V):
    """Flip column signs so each column's largest-magnitude entry is nonnegative.

    Deterministic across runs/platforms; operates in place on a copy.
    """
    V = np.array(V, dtype=float)
    for j in range(V.shape[1]):
        k = int(np.argmax(np.abs(V[:, j])))
        if V[k, j] < 0:
            V[:, j] = -V[:, j]
    return V


def sym_eigen(S):
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues descending, eigenvectors as columns), with the sign
    of each eigenvector canonicalized. Ties are left in the factorization's
    index order; span-level comparisons are the caller's job for degenerate
    eigenvalues.
    """
    S = symmetrize(S)
    _check_finite(S, "symmetric matrix")
    w, V = np.linalg.eigh(S)
    order = np.argsort(w)[::-1]
    return w[order], canonicalize_signs(V[:, order])


def logdet_pd(S, name="matrix"):
    """log-determinant of a symmetric positive definite matrix via Cholesky."""
    S = symmetrize(S)
    _check_finite(S, name)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(f"{name} is not positive definite")
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _gammainc_series(a, x):
    # Lower regularized P(a,x) by power series; converges fast for x < a+1.
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(1000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gammainc_contfrac(a, x):
    # Upper regularized Q(a,x) by modified Lentz continued fraction; x >= a+1.
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gammainc_upper(a, x):
    """Regularized upper incomplete gamma Q(a, x), a > 0, x >= 0."""
    if a <= 0:
        raise InvalidInputError("shape parameter must be positive")
    if x < 0:
        raise InvalidInputError("argument must be nonnegative")
    if x == 0.0:
        return 1.0
    # series/continued-fraction switch at x = a + 1 keeps both expansions
    # in their fast-convergence regions
    if x < a + 1.0:
        return min(max(1.0 - _gammainc_series(a, x), 0.0), 1.0)
    return min(max(_gammainc_contfrac(a, x), 0.0), 1.0)


def chi2_sf(x, df):
    """Upper-tail probability of a chi-square(df) variable at x."""
    if df < 1:
        raise InvalidInputError(f"degrees of freedom must be >= 1, got {df}")
    if x < 0:
        raise InvalidInputError(f"chi-square statistic must be nonnegative, got {x}")
    return gammainc_upper(df / 2.0, x / 2.0)


def chi2_cdf(x, df):
    """Lower-tail chi-square probability, via the same gamma kernel."""
    if df < 1:
        raise InvalidInputError(f"degrees of freedom must be >= 1, got {df}")
    if x < 0:
        raise InvalidInputError(f"chi-square statistic must be nonnegative, got {x}")
    if x == 0.0:
        return 0.0
    a = df / 2.0
    xx = x / 2.0
    if xx < a + 1.0:
        return min(max(_gammainc_series(a, xx), 0.0), 1.0)
    return min(max(1.0 - _gammainc_contfrac(a, xx), 0.0), 1.0)


def principal_angles(A, B):
    """Principal angles between span(A) and span(B), ascending, in [0, pi/2].

    A and B must have orthonormal columns and the same number of rows.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[0] != B.shape[0]:
        raise InvalidInputError(
            f"row counts differ: {A.shape[0]} vs {B.shape[0]}"
        )
    s = np.linalg.svd(A.T @ B, compute_uv=False)
    s = np.clip(s, 0.0, 1.0)
    return np.sort(np.arccos(s)[::-1])


def project_in_inner_product(G, S, v):
    """Project v onto span(G) in the S inner product: G (G'SG)^[-1] G'S v."""
    G = np.asarray(G, dtype=float)
    S = np.asarray(S, dtype=float)
    v = np.asarray(v, dtype=float)
    if G.shape[0] != S.shape[0] or v.shape[0] != G.shape[0]:
        raise InvalidInputError("G, S and v must share the ambient dimension")
    M = G.T @ S @ G
    try:
        w = np.linalg.solve(M, G.T @ (S @ v))
    except np.linalg.LinAlgError:
        raise SingularMatrixError("G'SG is numerically singular")
    return G @ w


def log_sum_exp(values):
    """log(sum(exp(values))) computed stably by max-shifting."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise InvalidInputError("log_sum_exp of an empty vector")
    m = float(np.max(values))
    if not np.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(values - m))))


def orthonormal_completion(G):
    """Return a p x (p-d) orthonormal basis of the orthogonal complement of span(G)."""
    G = np.asarray(G, dtype=float)
    p, d = G.shape
    if d == p:
        return np.zeros((p, 0))
    Q, _ = np.linalg.qr(G, mode="complete")
    Q0 = Q[:, d:]
    # re-orthogonalize against G to wash out rounding from the full QR
    Q0 = Q0 - G @ (G.T @ Q0)
    Q0, _ = np.linalg.qr(Q0)
    return Q0
