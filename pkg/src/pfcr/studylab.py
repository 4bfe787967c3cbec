"""Simulation generators and analytical studies.

Covers: the first-principal-component correlation formula and the
conditional-variance inequality for forward linear models; reproducible
generators for the forward model and the structured inverse model; the
per-predictor heteroscedasticity diagnostic; the bias-variance experiment for
deliberately underfitted reductions; and the multi-method comparison harness.

Report tables are lists of flat dicts with a stable header
(method, metric, value, rep, plus cell parameters); write_report_csv
serializes them for the CLI.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import ols_coeffs, projected_ols, pls_coeffs, r2_between, spc, standardized_pc
from .errors import InvalidInputError
from .estimation import GrassmannOptions, fit_extended_from_moments, fit_pc, fit_pfc_iso
from .model_core import BasisSpec, Dataset, build_basis, moments
from .numerics import chi2_sf, principal_angles, sym_eigen, symmetrize

SQRT3 = math.sqrt(3.0)


# ---------------------------------------------------------------------------
# forward model: X ~ N(0, Sigma), Y = beta'X + eps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ForwardSim:
    """Forward linear model with unit coefficient vector and PD Sigma."""

    beta: np.ndarray
    Sigma: np.ndarray
    sigma_eps2: float

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).ravel()
        if abs(np.linalg.norm(beta) - 1.0) > 1e-10:
            raise InvalidInputError("beta must be a unit vector")
        Sigma = symmetrize(self.Sigma)
        lam, V = sym_eigen(Sigma)
        if lam[-1] <= 0:
            raise InvalidInputError("Sigma must be positive definite")
        if np.any(np.diff(lam) >= 0):
            raise InvalidInputError("Sigma eigenvalues must be strictly descending")
        if self.sigma_eps2 <= 0:
            raise InvalidInputError("sigma_eps2 must be positive")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "Sigma", Sigma)
        object.__setattr__(self, "_lam", lam)
        object.__setattr__(self, "_V", V)

    @property
    def eigenvalues(self):
        return self._lam

    @property
    def eigenvectors(self):
        return self._V


def rho1_squared(sim):
    """Squared correlation between Y and the first principal component score.

    rho1^2 = (beta'v1)^2 lam1 / (sigma_eps2 + sum_j (beta'v_j)^2 lam_j).
    """
    a = sim.eigenvectors.T @ sim.beta  # beta'v_j
    lam = sim.eigenvalues
    denom = sim.sigma_eps2 + float(np.sum(a**2 * lam))
    return float(a[0] ** 2 * lam[0]) / denom


def cond_var_pc1(sim):
    """Var(Y | v1'X) = sigma_eps2 + sum_{j>=2} (beta'v_j)^2 lam_j.

    Does not involve lam1 at all, so perturbing lam1 (holding eigenvectors
    and beta fixed) cannot change the value.
    """
    a = sim.eigenvectors.T @ sim.beta
    lam = sim.eigenvalues
    return sim.sigma_eps2 + float(np.sum(a[1:] ** 2 * lam[1:]))


def simulate_forward(sim, n, seed):
    """Draw n observations: X via eigen-factor sampling, Y = X beta + eps."""
    if n < 2:
        raise InvalidInputError("need n >= 2")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, sim.beta.shape[0]))
    X = Z * np.sqrt(sim.eigenvalues) @ sim.eigenvectors.T
    y = X @ sim.beta + math.sqrt(sim.sigma_eps2) * rng.standard_normal(n)
    return Dataset(X=X, y=y)


# ---------------------------------------------------------------------------
# inverse model generator
# ---------------------------------------------------------------------------

def _uniform_poly_moments(r):
    """Population moments of the standardized polynomial basis under Y ~ U[-1,1].

    With z = sqrt(3) y (zero mean, unit variance), E z^k = 3^{k/2}/(k+1) for
    even k and 0 for odd k. Returns (mean of raw powers, Var(f), Cov(f, Y)).
    """
    def ez(k):
        return SQRT3**k / (k + 1) if k % 2 == 0 else 0.0

    mean = np.array([ez(k) for k in range(1, r + 1)])
    V = np.array([[ez(j + k) - ez(j) * ez(k) for k in range(1, r + 1)]
                  for j in range(1, r + 1)])
    # Cov(z^j, Y) = E[z^j y] = E[z^{j+1}] / sqrt(3)
    cov_y = np.array([ez(j + 1) / SQRT3 for j in range(1, r + 1)])
    return mean, V, cov_y


def _poly_features(y, r):
    """Population-standardized polynomial features (z^k - E z^k), z = sqrt(3) y."""
    z = SQRT3 * np.asarray(y, dtype=float)
    mean, _, _ = _uniform_poly_moments(r)
    return np.column_stack([z**k for k in range(1, r + 1)]) - mean


def _pd_sqrt(M):
    lam, V = sym_eigen(symmetrize(M))
    if lam[-1] <= 0:
        raise InvalidInputError("covariance block is not positive definite")
    return V * np.sqrt(lam) @ V.T


@dataclass(frozen=True)
class InverseSim:
    """Generator for the structured inverse model with Y ~ Uniform[-1, 1].

    X | Y=y is normal with mean mu + Gamma beta_mat f(y) and covariance
    Gamma Omega2 Gamma' + Gamma0 Omega02 Gamma0'; f is the population-
    standardized polynomial basis, so the moment identities
    Var(X) = Gamma M Gamma' + Gamma0 Omega02 Gamma0',
    M = Omega2 + beta_mat Var(f_Y) beta_mat' hold exactly.
    """

    mu: np.ndarray
    Gamma: np.ndarray        # p x d
    beta_mat: np.ndarray     # d x r
    Omega2: np.ndarray       # d x d PD
    Omega0_2: np.ndarray     # (p-d) x (p-d) PD
    spec: BasisSpec

    def __post_init__(self):
        if self.spec.kind != "polynomial":
            raise InvalidInputError("inverse simulator supports polynomial bases only")
        G = np.asarray(self.Gamma, dtype=float)
        if np.max(np.abs(G.T @ G - np.eye(G.shape[1]))) > 1e-8:
            raise InvalidInputError("Gamma must have orthonormal columns")
        object.__setattr__(self, "Gamma", G)
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float).ravel())
        object.__setattr__(self, "beta_mat", np.atleast_2d(np.asarray(self.beta_mat, dtype=float)))

    @property
    def p(self):
        return self.Gamma.shape[0]

    @property
    def d(self):
        return self.Gamma.shape[1]

    def gamma0(self):
        from .numerics import orthonormal_completion

        return orthonormal_completion(self.Gamma)

    def population_cov(self):
        """Var(X) = Gamma M Gamma' + Gamma0 Omega02 Gamma0'."""
        _, Vf, _ = _uniform_poly_moments(self.spec.r)
        M = self.Omega2 + self.beta_mat @ Vf @ self.beta_mat.T
        S = self.Gamma @ M @ self.Gamma.T
        G0 = self.gamma0()
        if G0.shape[1]:
            S = S + G0 @ self.Omega0_2 @ G0.T
        return symmetrize(S)

    def population_cov_xy(self):
        """Cov(X, Y) = Gamma beta_mat Cov(f_Y, Y)."""
        _, _, cfy = _uniform_poly_moments(self.spec.r)
        return self.Gamma @ (self.beta_mat @ cfy)

    def population_ols(self):
        """Population OLS coefficient vector B = Var(X)^{-1} Cov(X, Y)."""
        return np.linalg.solve(self.population_cov(), self.population_cov_xy())


def simulate_inverse(sim, n, seed):
    """Draw n observations from the structured inverse model."""
    if n < sim.p + sim.spec.r + 2:
        raise InvalidInputError("need n >= p + r + 2")
    rng = np.random.default_rng(seed)
    y = rng.uniform(-1.0, 1.0, size=n)
    F = _poly_features(y, sim.spec.r)
    mean = sim.mu + F @ sim.beta_mat.T @ sim.Gamma.T
    E = rng.standard_normal((n, sim.d)) @ _pd_sqrt(sim.Omega2) @ sim.Gamma.T
    G0 = sim.gamma0()
    if G0.shape[1]:
        E = E + rng.standard_normal((n, G0.shape[1])) @ _pd_sqrt(sim.Omega0_2) @ G0.T
    return Dataset(X=mean + E, y=y)


# ---------------------------------------------------------------------------
# heteroscedasticity diagnostic
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HeteroRow:
    predictor: int
    slope: float
    slope_t: float
    score_stat: float
    score_pvalue: float
    flagged: bool


def hetero_diag(data, alpha=0.05, slope_t_max=2.0):
    """Per-predictor check for y-dependent spread of X_j given Y.

    For each predictor, fit X_j = a + b y by OLS, then run the 1-df score
    test (n R^2 of squared residuals regressed on y). A predictor is flagged
    when the mean trend is flat (|t| below slope_t_max) but the variance
    score is significant: the fingerprint of E(X_j|Y) ~ constant with
    nonconstant Var(X_j|Y).
    """
    if data.n < 8:
        raise InvalidInputError("diagnostic needs n >= 8")
    y = data.y
    yc = y - y.mean()
    syy = float(yc @ yc)
    if syy <= 0:
        raise InvalidInputError("response has zero variance")
    rows = []
    for j in range(data.p):
        x = data.X[:, j]
        b = float(yc @ (x - x.mean())) / syy
        a = float(x.mean() - b * y.mean())
        resid = x - a - b * y
        s2 = float(resid @ resid) / (data.n - 2)
        se = math.sqrt(s2 / syy)
        t = b / se if se > 0 else math.inf
        score = data.n * r2_between(resid**2, yc)
        pval = chi2_sf(score, 1)
        rows.append(HeteroRow(
            predictor=j, slope=b, slope_t=t, score_stat=score,
            score_pvalue=pval, flagged=(abs(t) < slope_t_max and pval < alpha),
        ))
    return rows


# ---------------------------------------------------------------------------
# bias-variance experiment for underfitted reductions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BiasVarianceConfig:
    """Grid for the underfitting experiment.

    Data are generated from the unstructured (d = p) inverse model whose mean
    rows have the given per-coordinate signal strengths; the estimand is the
    population OLS coefficient vector, estimated by projecting OLS onto the
    span fitted at each d_fit.
    """

    p: int = 4
    r: int = 1
    n_grid: tuple = (100,)
    d_fit_grid: tuple = (1, 4)
    replications: int = 100
    seed: int = 0
    signal: tuple = None         # length-p row strengths; default geometric decay
    noise_scale: float = 1.0

    def generator(self):
        strengths = np.asarray(
            self.signal if self.signal is not None
            else [2.0 * 0.25**k for k in range(self.p)],
            dtype=float,
        )
        rng = np.random.default_rng(self.seed + 987654321)
        beta_mat = rng.standard_normal((self.p, self.r))
        beta_mat = strengths[:, None] * beta_mat / np.linalg.norm(beta_mat, axis=1, keepdims=True)
        Q = np.linalg.qr(rng.standard_normal((self.p, self.p)))[0]
        Omega2 = self.noise_scale * symmetrize(
            Q * np.linspace(1.0, 2.0, self.p) @ Q.T
        )
        return InverseSim(
            mu=np.zeros(self.p),
            Gamma=np.eye(self.p),
            beta_mat=beta_mat,
            Omega2=Omega2,
            Omega0_2=np.zeros((0, 0)),
            spec=BasisSpec.polynomial(self.r),
        )


def bias_variance_experiment(cfg, opts=None, threads=1):
    """MSE / squared-bias / variance of projected-OLS coefficients per grid cell.

    Replications are independent (each owns a seed derived from its index);
    with threads > 1 they run on a thread pool and are re-assembled in index
    order, so the report is identical regardless of scheduling.
    """
    from concurrent.futures import ThreadPoolExecutor

    opts = opts or GrassmannOptions()
    sim = cfg.generator()
    B_true = sim.population_ols()
    spec = sim.spec

    def one_rep(n, d_fit, rep):
        data = simulate_inverse(sim, n, seed=cfg.seed ^ (1000003 * rep + 17 * n))
        m = moments(data, build_basis(data.y, spec))
        fit = fit_extended_from_moments(m, spec, d_fit, opts)
        return projected_ols(fit, m).b

    rows = []
    for n in cfg.n_grid:
        for d_fit in cfg.d_fit_grid:
            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    ests = list(pool.map(lambda rep: one_rep(n, d_fit, rep),
                                         range(cfg.replications)))
            else:
                ests = [one_rep(n, d_fit, rep) for rep in range(cfg.replications)]
            ests = np.array(ests)
            mean_b = ests.mean(axis=0)
            bias2 = float(np.sum((mean_b - B_true) ** 2))
            variance = float(np.mean(np.sum((ests - mean_b) ** 2, axis=1)))
            for rep, b in enumerate(ests):
                rows.append({"method": "EXTENDED", "metric": "sqerr",
                             "value": float(np.sum((b - B_true) ** 2)),
                             "rep": rep, "n": n, "d_fit": d_fit})
            cell = {"n": n, "d_fit": d_fit, "rep": ""}
            rows.append({"method": "EXTENDED", "metric": "bias2", "value": bias2, **cell})
            rows.append({"method": "EXTENDED", "metric": "variance", "value": variance, **cell})
            rows.append({"method": "EXTENDED", "metric": "mse", "value": bias2 + variance, **cell})
    return rows


# ---------------------------------------------------------------------------
# method comparison harness
# ---------------------------------------------------------------------------

REDUCTION_METHODS = ("PC", "STDPC", "SPC", "PFC_ISO", "EXTENDED")
COEFFICIENT_METHODS = ("OLS", "PROJECTED", "PLS")
ALL_METHODS = REDUCTION_METHODS + COEFFICIENT_METHODS


def _orthonormal(G):
    Q, _ = np.linalg.qr(G)
    return Q


def _reduction_basis(method, data, spec, d, rule, opts):
    if method == "PC":
        fit = fit_pc(data, d)
        return fit.Gamma, fit
    if method == "STDPC":
        red = standardized_pc(data, d)
        return _orthonormal(red.Gamma), red
    if method == "SPC":
        red = spc(data, rule or ("top", max(1, data.p // 2)), d)
        return _orthonormal(red.Gamma), red
    if method == "PFC_ISO":
        fit = fit_pfc_iso(data, spec, min(d, spec.r))
        return fit.Gamma, fit
    if method == "EXTENDED":
        m = moments(data, build_basis(data.y, spec))
        fit = fit_extended_from_moments(m, spec, d, opts)
        return fit.Gamma, fit
    raise InvalidInputError(f"unknown method {method!r}; valid: {', '.join(ALL_METHODS)}")


def method_comparison(data, methods, spec=None, d=1, q=None, rule=None,
                      true_Gamma=None, true_b=None, seed=0, opts=None):
    """Compare reductions and coefficient estimators on one dataset.

    Reductions are scored by pairwise r2_between (regression of each method's
    first component on every other method's reduction) and, when the truth is
    known, by the max principal angle to it. Coefficient methods get an
    out-of-sample prediction MSE on a deterministic 80/20 split and, when
    true_b is given, a coefficient MSE. Returns report rows (see module doc).
    """
    opts = opts or GrassmannOptions(seed=seed)
    spec = spec or BasisSpec.polynomial(1)
    for method in methods:
        if method not in ALL_METHODS:
            raise InvalidInputError(
                f"unknown method {method!r}; valid: {', '.join(ALL_METHODS)}"
            )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    cut = max(2, int(0.8 * data.n))
    tr, te = perm[:cut], perm[cut:]
    train = Dataset(X=data.X[tr], y=data.y[tr])
    rows = []
    reductions = {}
    for method in methods:
        if method in REDUCTION_METHODS:
            Gamma, _ = _reduction_basis(method, data, spec, d, rule, opts)
            reductions[method] = Gamma
            if true_Gamma is not None:
                ang = float(np.max(principal_angles(Gamma, _orthonormal(true_Gamma))))
                rows.append({"method": method, "metric": "max_angle_to_truth",
                             "value": ang, "rep": "", "other": ""})
    Xc = data.X - data.X.mean(axis=0)
    for a, Ga in reductions.items():
        Za = Xc @ Ga
        for b_name, Gb in reductions.items():
            val = r2_between(Za[:, 0], Xc @ Gb)
            rows.append({"method": a, "metric": "r2_on", "value": val,
                         "rep": "", "other": b_name})
    coef_methods = [mth for mth in methods if mth in COEFFICIENT_METHODS]
    if coef_methods and len(te) >= 2:
        basis = build_basis(train.y, spec)
        m = moments(train, basis)
        for method in coef_methods:
            if method == "OLS":
                est = ols_coeffs(m)
            elif method == "PLS":
                est = pls_coeffs(m, q or 1)
            else:
                fit = fit_extended_from_moments(m, spec, d, opts)
                est = projected_ols(fit, m)
            yhat = train.y.mean() + (data.X[te] - m.xbar) @ est.b
            mse = float(np.mean((data.y[te] - yhat) ** 2))
            rows.append({"method": method, "metric": "pred_mse",
                         "value": mse, "rep": "", "other": ""})
            if true_b is not None:
                rows.append({"method": method, "metric": "coef_mse",
                             "value": float(np.sum((est.b - true_b) ** 2)),
                             "rep": "", "other": ""})
    return rows


REPORT_FIELDS = ("method", "metric", "value", "rep", "other", "n", "d_fit")


def write_report_csv(rows, path_or_file):
    """Serialize report rows with the documented header; missing cells are blank."""
    def _write(fh):
        writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, restval="",
                                extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            _write(fh)
