"""Comparison estimators: OLS, model-projected OLS, Krylov-subspace PLS,
correlation-screened supervised principal components, standardized PCA,
and the R-squared-between-reductions diagnostic.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, InvalidInputError, SingularMatrixError
from .numerics import sym_eigen, symmetrize


@dataclass(frozen=True)
class CoefficientEstimate:
    method: str  # "OLS" | "PROJECTED" | "PLS"
    b: np.ndarray
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScreenedPartition:
    """Kept/dropped predictor split from marginal screening."""

    kept: tuple
    dropped: tuple
    scores: np.ndarray


@dataclass(frozen=True)
class LinearReduction:
    """A plain linear reduction x -> Gamma'(x - mu), for method comparisons."""

    method: str
    Gamma: np.ndarray  # p x d, orthonormal columns
    mu: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def d(self):
        return self.Gamma.shape[1]

    def transform(self, X):
        return (np.atleast_2d(X) - self.mu) @ self.Gamma


def ols_coeffs(m):
    """b = Sigma_hat^{-1} C_hat."""
    try:
        b = np.linalg.solve(m.Sigma_hat, m.C_hat)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("Sigma_hat is singular; cannot form OLS coefficients")
    return CoefficientEstimate(method="OLS", b=b)


def projected_ols(fit, m):
    """Project the OLS estimate onto span(Gamma) in the Sigma_hat inner product.

    Closed form: b = Gamma (Gamma' Sigma Gamma)^{-1} Gamma' C_hat.
    """
    G = fit.Gamma
    if G.shape[0] != m.p:
        raise InvalidInputError("fit and moments disagree on p")
    M = G.T @ m.Sigma_hat @ G
    try:
        w = np.linalg.solve(M, G.T @ m.C_hat)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("Gamma' Sigma_hat Gamma is singular")
    return CoefficientEstimate(method="PROJECTED", b=G @ w, meta={"d": fit.d})


def pls_coeffs(m, q):
    """Partial least squares via the Krylov subspace (C, Sigma C, ..., Sigma^{q-1} C).

    The Krylov columns are orthonormalized by Gram-Schmidt with a drop
    tolerance, so the effective q can shrink; the only linear solve is the
    q_eff x q_eff restricted system (Sigma_hat is never factorized).
    """
    if q < 1:
        raise InvalidInputError(f"q must be >= 1, got {q}")
    c = m.C_hat
    cnorm = np.linalg.norm(c)
    if cnorm <= 0:
        raise DegenerateInputError("C_hat = 0: predictors carry no linear response correlation")
    drop_tol = 1e-10 * cnorm
    cols = []
    v = c.copy()
    for _ in range(q):
        w = v.copy()
        for u in cols:
            w -= (u @ w) * u
        # second pass for numerical orthogonality
        for u in cols:
            w -= (u @ w) * u
        nrm = np.linalg.norm(w)
        if nrm < drop_tol:
            break
        cols.append(w / nrm)
        v = m.Sigma_hat @ v
    K = np.column_stack(cols)
    q_eff = K.shape[1]
    M = K.T @ m.Sigma_hat @ K
    try:
        w = np.linalg.solve(M, K.T @ c)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("K' Sigma_hat K is singular")
    return CoefficientEstimate(method="PLS", b=K @ w, meta={"q": q, "q_eff": q_eff})


def screen_predictors(data, rule):
    """Marginal screening by absolute correlation with the response.

    rule is ("top", k) or ("threshold", t); ties break toward the lower index.
    """
    X, y = data.X, data.y
    yc = y - y.mean()
    sy = np.linalg.norm(yc)
    Xc = X - X.mean(axis=0)
    scores = np.abs(Xc.T @ yc) / (np.linalg.norm(Xc, axis=0) * sy)
    kind, val = rule
    if kind == "top":
        k = int(val)
        if not 1 <= k <= data.p:
            raise InvalidInputError(f"top-k must be in [1, {data.p}], got {k}")
        # stable sort on (-score, index) gives the lower-index tie break
        order = sorted(range(data.p), key=lambda j: (-scores[j], j))
        kept = tuple(sorted(order[:k]))
    elif kind == "threshold":
        t = float(val)
        if t < 0:
            raise InvalidInputError(f"threshold must be >= 0, got {t}")
        kept = tuple(int(j) for j in range(data.p) if scores[j] > t)
        if not kept:
            raise DegenerateInputError(f"no predictor exceeds the threshold {t}")
    else:
        raise InvalidInputError(f"unknown screening rule {kind!r}")
    dropped = tuple(j for j in range(data.p) if j not in set(kept))
    return ScreenedPartition(kept=kept, dropped=dropped, scores=scores)


def _pc_direction_matrix(X, d):
    xbar = X.mean(axis=0)
    Xc = X - xbar
    S = symmetrize(Xc.T @ Xc / X.shape[0])
    _, V = sym_eigen(S)
    return xbar, V[:, :d]


def spc(data, rule, d):
    """Supervised principal components: screen, then PCA of the kept block.

    The loadings are embedded back into R^p with zeros on dropped coordinates
    so the result is comparable (principal angles, r2_between) with full-space
    reductions.
    """
    part = screen_predictors(data, rule)
    kept = list(part.kept)
    if d > len(kept):
        raise InvalidInputError(f"d = {d} exceeds the kept block size {len(kept)}")
    _, V1 = _pc_direction_matrix(data.X[:, kept], d)
    Gamma = np.zeros((data.p, d))
    Gamma[kept, :] = V1
    return LinearReduction(method="SPC", Gamma=Gamma, mu=data.X.mean(axis=0),
                           meta={"kept": part.kept, "scores": part.scores})


def standardized_pc(data, d):
    """PCA after scaling every predictor to unit marginal standard deviation.

    Loadings are reported in both coordinate systems: `Gamma` acts on the
    original X (columns normalized to unit length, not orthonormal in
    general), `meta['Gamma_std']` is orthonormal in standardized coordinates.
    """
    sd = data.X.std(axis=0)
    Z = (data.X - data.X.mean(axis=0)) / sd
    S = symmetrize(Z.T @ Z / data.n)
    _, V = sym_eigen(S)
    G_std = V[:, :d]
    # back to original coordinates: z = (x - mu)/sd, so loadings scale by 1/sd
    G_orig = G_std / sd[:, None]
    G_orig = G_orig / np.linalg.norm(G_orig, axis=0)
    return LinearReduction(method="STDPC", Gamma=G_orig, mu=data.X.mean(axis=0),
                           meta={"Gamma_std": G_std, "sd": sd})


def r2_between(u, Z):
    """R-squared of the OLS regression of u on Z with an intercept."""
    u = np.asarray(u, dtype=float).ravel()
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.ndim == 2 and Z.shape[0] != u.shape[0]:
        Z = Z.T
    uc = u - u.mean()
    Zc = Z - Z.mean(axis=0)
    if np.linalg.matrix_rank(Zc) < Zc.shape[1]:
        raise SingularMatrixError("Z is rank deficient after centering")
    coef, *_ = np.linalg.lstsq(Zc, uc, rcond=None)
    fitted = Zc @ coef
    sst = float(uc @ uc)
    if sst <= 0:
        raise DegenerateInputError("u has zero variance")
    ssr = float((uc - fitted) @ (uc - fitted))
    return max(0.0, min(1.0, 1.0 - ssr / sst))
