"""Fitting the inverse models and inferring the reduction dimension.

Three fitters share the FittedReduction result type:

* fit_pc        - principal components (spectral MLE of the isotropic PC model)
* fit_pfc_iso   - isotropic-error principal fitted components
* fit_extended  - structured-covariance model, fitted by multistart first-order
                  Riemannian ascent on the Grassmann manifold

Grassmann ascent. The profile log-likelihood depends on the candidate basis S
only through span(S), so the natural search space is the Grassmann manifold of
d-planes. We minimize the kernel f(S) = log|S'Sigma_res S| + log|S'Sigma^-1 S|
(an affine transform of -loglik). With Euclidean gradient D = df/dS, the
Riemannian gradient at a point with orthonormal basis S is the tangent
projection G = (I - SS')D; steps are retracted back to the manifold by a
thin QR factorization with positive diagonal. Step sizes come from a
backtracking (Armijo) line search. The gradient of each log-det term is
d/dS log|S'MS| = 2 M S (S'MS)^{-1}, validated against finite differences in
the test suite.

Degrees of freedom of the dimension test. Parameter counts:
full model      p (mean) + p*r (beta) + p(p+1)/2 (unstructured covariance);
extended model  p (mean) + d(p-d) (span) + d*r (beta) + d(d+1)/2 + (p-d)(p-d+1)/2.
The covariance-side counts are equal (d(p-d) + d(d+1)/2 + (p-d)(p-d+1)/2 =
p(p+1)/2), so the difference is r(p-d): the statistic Lambda_d is referred to
a chi-square with r(p-d) degrees of freedom.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidInputError
from .model_core import (
    LOG_2PI,
    FittedReduction,
    ProfileObjective,
    build_basis,
    check_extended_sample_size,
    full_model_loglik,
    moments,
)
from .numerics import canonicalize_signs, chi2_sf, orthonormal_completion, sym_eigen, symmetrize


@dataclass(frozen=True)
class GrassmannOptions:
    """Knobs for the multistart Grassmann ascent."""

    max_iters: int = 500
    grad_tol: float = 1e-7
    initial_step: float = 1.0
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    n_random_seeds: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")
        for name in ("grad_tol", "initial_step", "shrink", "sufficient_decrease"):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be positive")


@dataclass(frozen=True)
class TestResult:
    """Likelihood-ratio dimension test at a single d."""

    d: int
    Lambda: float
    df: int
    pvalue: float


def extended_param_count(p, d, r):
    """Free parameters of the structured model at dimension d (exact integers)."""
    return p + d * (p - d) + d * r + d * (d + 1) // 2 + (p - d) * (p - d + 1) // 2


def full_param_count(p, r):
    """Free parameters of the unstructured (d = p) inverse model."""
    return p + p * r + p * (p + 1) // 2


def lrt_df(p, d, r):
    """Degrees of freedom of the dimension test: r(p-d) by parameter counting."""
    return r * (p - d)


def _qr_retract(M):
    Q, R = np.linalg.qr(M)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def _ascend(S, A, B, opts):
    """Minimize f from the given start; returns (S, f, converged)."""
    return kernels.ascend(
        kernels.ascontiguous(S), A, B, opts.max_iters, opts.grad_tol,
        opts.initial_step, opts.shrink, opts.sufficient_decrease,
    )


def _eigenvector_seeds(m, d):
    """All d-subsets of the top-(d+2) eigenvectors of Sigma_fit and Sigma_hat."""
    p = m.p
    k = min(d + 2, p)
    seeds = []
    for mat in (m.Sigma_fit, m.Sigma_hat):
        _, V = sym_eigen(mat)
        for idx in itertools.combinations(range(k), d):
            seeds.append(np.ascontiguousarray(V[:, list(idx)]))
    return seeds


def _random_seeds(p, d, count, seed):
    rng = np.random.default_rng(seed)
    return [kernels.ascontiguous(_qr_retract(rng.standard_normal((p, d))))
            for _ in range(count)]


def _full_model_fit(m, spec):
    p = m.p
    Gamma = np.eye(p)
    return FittedReduction(
        kind="EXTENDED",
        d=p,
        mu=m.xbar.copy(),
        Gamma=Gamma,
        Gamma0=np.zeros((p, 0)),
        beta=m.Bxf.copy(),
        Omega2=m.Sigma_res.copy(),
        Omega0_2=np.zeros((0, 0)),
        loglik=full_model_loglik(m),
        spec=spec,
        converged=True,
    )


def fit_extended_from_moments(m, spec, d, opts=None, extra_seeds=()):
    """Grassmann-ascent fit of the structured model from precomputed moments."""
    opts = opts or GrassmannOptions()
    p = m.p
    if not 1 <= d <= p:
        raise InvalidInputError(f"d must be in [1, {p}], got {d}")
    check_extended_sample_size(m)
    if d == p:
        return _full_model_fit(m, spec)
    obj = ProfileObjective(m)
    A, B = kernels.ascontiguous(obj.A), kernels.ascontiguous(obj.B)
    seeds = _eigenvector_seeds(m, d)
    seeds += [kernels.ascontiguous(S) for S in extra_seeds]
    seeds += _random_seeds(p, d, opts.n_random_seeds, opts.seed)
    best = None  # (f, seed_index, S, converged)
    for i, S0 in enumerate(seeds):
        S, f, conv = _ascend(S0, A, B, opts)
        if best is None or f < best[0]:
            best = (f, i, S, conv)
    f, _, S, converged = best
    # canonical basis of the winning span: diagonalize Gamma' Sigma_fit Gamma
    W = symmetrize(S.T @ m.Sigma_fit @ S)
    _, V = sym_eigen(W)
    Gamma = canonicalize_signs(S @ V)
    Gamma0 = orthonormal_completion(Gamma)
    return FittedReduction(
        kind="EXTENDED",
        d=d,
        mu=m.xbar.copy(),
        Gamma=Gamma,
        Gamma0=Gamma0,
        beta=Gamma.T @ m.Bxf,
        Omega2=symmetrize(Gamma.T @ m.Sigma_res @ Gamma),
        Omega0_2=symmetrize(Gamma0.T @ m.Sigma_hat @ Gamma0),
        loglik=obj.loglik_from_kernel(f),
        spec=spec,
        converged=converged,
    )


def fit_extended(data, spec, d, opts=None):
    """Fit the structured-covariance inverse model at dimension d."""
    basis = build_basis(data.y, spec)
    return fit_extended_from_moments(moments(data, basis), spec, d, opts)


def fit_pc(data, d):
    """Principal-component reduction: top-d eigenvectors of Sigma_hat.

    The reported log-likelihood is the isotropic PC-model value with the
    error variance estimated as the average of the discarded eigenvalues.
    """
    p = data.p
    if not 1 <= d <= p:
        raise InvalidInputError(f"d must be in [1, {p}], got {d}")
    xbar = data.X.mean(axis=0)
    Xc = data.X - xbar
    Sigma = symmetrize(Xc.T @ Xc / data.n)
    lam, V = sym_eigen(Sigma)
    Gamma = V[:, :d]
    Gamma0 = V[:, d:]
    if d < p:
        sigma2 = float(np.mean(lam[d:]))
        ld = float(np.sum(np.log(lam[:d]))) + (p - d) * np.log(sigma2)
    else:
        sigma2 = 0.0
        ld = float(np.sum(np.log(lam)))
    loglik = -(data.n / 2.0) * (p * LOG_2PI + p + ld)
    return FittedReduction(
        kind="PC",
        d=d,
        mu=xbar,
        Gamma=Gamma,
        Gamma0=Gamma0,
        beta=None,
        Omega2=np.diag(lam[:d]),
        Omega0_2=sigma2 * np.eye(p - d),
        loglik=loglik,
        spec=None,
    )


def fit_pfc_iso(data, spec, d):
    """Isotropic-error principal fitted components: top-d eigenvectors of Sigma_fit."""
    basis = build_basis(data.y, spec)
    m = moments(data, basis)
    p, r = m.p, m.r
    if not 1 <= d <= min(p, r):
        raise InvalidInputError(f"d must be in [1, min(p, r) = {min(p, r)}], got {d}")
    lam_fit, V = sym_eigen(m.Sigma_fit)
    rank = int(np.sum(lam_fit > 1e-10 * max(1.0, lam_fit[0])))
    if d > rank:
        raise InvalidInputError(f"d = {d} exceeds rank(Sigma_fit) = {rank}")
    Gamma = V[:, :d]
    Gamma0 = orthonormal_completion(Gamma)
    sigma2 = float(np.trace(m.Sigma_hat) - np.sum(lam_fit[:d])) / p
    loglik = -(m.n / 2.0) * (p * LOG_2PI + p + p * np.log(sigma2))
    return FittedReduction(
        kind="PFC_ISO",
        d=d,
        mu=m.xbar.copy(),
        Gamma=Gamma,
        Gamma0=Gamma0,
        beta=Gamma.T @ m.Bxf,
        Omega2=sigma2 * np.eye(d),
        Omega0_2=sigma2 * np.eye(p - d),
        loglik=loglik,
        spec=spec,
    )


def lrt_from_fit(fit, m):
    """Dimension-test statistic for an already-fitted extended model."""
    Lambda = max(0.0, 2.0 * (full_model_loglik(m) - fit.loglik))
    df = lrt_df(m.p, fit.d, m.r)
    pvalue = chi2_sf(Lambda, df) if df > 0 else 1.0
    return TestResult(d=fit.d, Lambda=Lambda, df=df, pvalue=pvalue)


def lrt_dimension(data, spec, d, opts=None):
    """Likelihood-ratio test of dimension d against the full model."""
    basis = build_basis(data.y, spec)
    m = moments(data, basis)
    fit = fit_extended_from_moments(m, spec, d, opts)
    return lrt_from_fit(fit, m)


def _warm_start_seeds(prev_Gamma, m):
    """Augment the previous winner with leading eigenvectors not in its span."""
    seeds = []
    for mat in (m.Sigma_fit, m.Sigma_hat):
        _, V = sym_eigen(mat)
        for j in range(min(3, m.p)):
            v = V[:, j]
            w = v - prev_Gamma @ (prev_Gamma.T @ v)
            nrm = np.linalg.norm(w)
            if nrm > 1e-8:
                seeds.append(np.column_stack([prev_Gamma, w / nrm]))
    return seeds


def apply_selection_rule(results, alpha, p):
    """Smallest tested d whose p-value strictly exceeds alpha, else p."""
    for t in results:
        if t.pvalue > alpha:
            return t.d
    return p


def select_dimension(data, spec, alpha, opts=None):
    """Sequential dimension selection: smallest d with p-value > alpha.

    Tests d = 1, 2, ... in order with a strict ">" comparison; if every
    d < p is rejected, returns p (alpha = 1 therefore always selects p).
    Each step warm-starts from the previous winner so the statistics are
    monotone nonincreasing in d.
    """
    if not 0 < alpha <= 1:
        raise InvalidInputError(f"alpha must be in (0, 1], got {alpha}")
    basis = build_basis(data.y, spec)
    m = moments(data, basis)
    check_extended_sample_size(m)
    trail = []
    prev_Gamma = None
    for d in range(1, data.p):
        extra = _warm_start_seeds(prev_Gamma, m) if prev_Gamma is not None else ()
        fit = fit_extended_from_moments(m, spec, d, opts, extra_seeds=extra)
        result = lrt_from_fit(fit, m)
        trail.append(result)
        prev_Gamma = fit.Gamma
        if result.pvalue > alpha:
            return d, trail
    return data.p, trail


def reduce(fit, X):
    """Apply the fitted reduction: (X - mu') Gamma, row-wise."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != fit.p:
        raise InvalidInputError(
            f"query has {X.shape[1]} columns, fit expects {fit.p}"
        )
    return (X - fit.mu) @ fit.Gamma
