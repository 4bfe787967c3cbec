"""Regression data model, inverse-regression bases, sample moments, and the
profile log-likelihood of the structured-covariance inverse model.

Model and conventions
---------------------
The inverse model treats X | (Y = y) as p-variate normal with mean
``mu + Gamma beta f_y`` and constant covariance
``Delta = Gamma Omega^2 Gamma' + Gamma0 Omega0^2 Gamma0'`` where Gamma is
semi-orthogonal p x d and Gamma0 completes it. All sample covariances use the
MLE divisor n (not n-1) so that likelihood-ratio differences are exact.

Profile log-likelihood derivation (documented here, validated in tests):
for a fixed candidate span S (semi-orthogonal p x d, completion S0), maximizing
the exact normal log-likelihood over (mu, beta, Omega^2, Omega0^2) gives

    mu_hat     = xbar
    beta_hat   = regression coefficients of S'X_c on F
    Omega2_hat = S' Sigma_res S
    Omega02_hat= S0' Sigma_hat S0

and the maximized value

    L(S) = -(n/2) [ p log(2 pi) + p + log|S' Sigma_res S| + log|S0' Sigma_hat S0| ].

The sketch: in the rotated coordinates (S'X, S0'X) the likelihood factorizes;
the S-block is a multivariate regression of S'X on F whose residual covariance
MLE is S'Sigma_res S, while the S0-block has no mean dependence on f_y, so its
covariance MLE is the marginal S0'Sigma_hat S0. Each Gaussian block contributes
its log-determinant plus the dimension (from the trace term at the MLE).

To avoid differentiating through the completion S0, the implementation uses the
determinant identity  |S0' Sigma S0| = |Sigma| * |S' Sigma^{-1} S|  (valid for
any orthogonal [S S0] and PD Sigma), so

    L(S) = -(n/2) [ p log(2 pi) + p + log|Sigma_hat|
                    + log|S' Sigma_res S| + log|S' Sigma_hat^{-1} S| ].

Both forms are implemented; their equality is a unit test.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBasisError, InvalidInputError, SingularMatrixError
from .numerics import logdet_pd, symmetrize

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Dataset:
    """Predictor matrix X (n x p) paired with response vector y (n)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise InvalidInputError(
                f"X has {X.shape[0]} rows but y has {y.shape[0]} entries"
            )
        if X.shape[0] < 2:
            raise InvalidInputError("need at least 2 observations")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidInputError("dataset contains non-finite entries")
        if np.any(np.var(X, axis=0) <= 0.0):
            bad = [int(j) for j in np.flatnonzero(np.var(X, axis=0) <= 0.0)]
            raise InvalidInputError(f"constant predictor column(s): {bad}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class BasisSpec:
    """Inverse-regression basis choice: polynomial(degree) or slices(count)."""

    kind: str  # "polynomial" | "slices"
    degree: int = 0  # polynomial degree, >= 1
    slices: int = 0  # slice count h, >= 2

    def __post_init__(self):
        if self.kind == "polynomial":
            if self.degree < 1:
                raise InvalidInputError("polynomial degree must be >= 1")
        elif self.kind == "slices":
            if self.slices < 2:
                raise InvalidInputError("slice count must be >= 2")
        else:
            raise InvalidInputError(f"unknown basis kind {self.kind!r}")

    @property
    def r(self):
        """Dimension of the basis: degree for polynomials, h-1 for slices."""
        return self.degree if self.kind == "polynomial" else self.slices - 1

    @staticmethod
    def polynomial(degree):
        return BasisSpec(kind="polynomial", degree=degree)

    @staticmethod
    def sliced(h):
        return BasisSpec(kind="slices", slices=h)


@dataclass(frozen=True)
class DesignBasis:
    """Realized, column-centered n x r design matrix F for a BasisSpec."""

    F: np.ndarray
    spec: BasisSpec

    @property
    def r(self):
        return self.F.shape[1]


def build_basis(y, spec):
    """Construct the centered design matrix F for the response vector y.

    Polynomial bases are built on y standardized to zero mean / unit variance
    before powering (the span is unchanged, the conditioning is not). Slices
    use equal-count quantile boundaries with ties assigned to the lower slice.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = y.shape[0]
    r = spec.r
    if r >= n:
        raise InvalidInputError(f"basis dimension r={r} must be < n={n}")
    if spec.kind == "polynomial":
        sd = float(np.std(y))
        if sd <= 0:
            raise DegenerateBasisError("response is constant; polynomial basis is degenerate")
        z = (y - float(np.mean(y))) / sd
        F = np.column_stack([z**k for k in range(1, spec.degree + 1)])
    else:
        h = spec.slices
        order = np.argsort(y, kind="stable")
        slice_id = np.empty(n, dtype=int)
        # equal-count slices over the sort order
        bounds = [round(i * n / h) for i in range(h + 1)]
        for s in range(h):
            slice_id[order[bounds[s]:bounds[s + 1]]] = s
        # ties across a boundary go to the lower slice
        for s in range(1, h):
            if bounds[s] == 0 or bounds[s] >= n:
                continue
            cut = y[order[bounds[s] - 1]]
            slice_id[(y == cut) & (slice_id == s)] = s - 1
        counts = np.bincount(slice_id, minlength=h)
        if np.any(counts < 2):
            raise DegenerateBasisError(
                f"every slice needs >= 2 observations, got counts {counts.tolist()}"
            )
        # indicators of slices 1..h-1 (the lowest slice is the reference)
        F = np.zeros((n, h - 1))
        for s in range(1, h):
            F[slice_id == s, s - 1] = 1.0
    F = F - F.mean(axis=0)
    if np.linalg.matrix_rank(F) < r:
        raise DegenerateBasisError(
            f"design matrix is rank deficient (rank < {r}); "
            "the response may have too few distinct values"
        )
    return DesignBasis(F=F, spec=spec)


@dataclass(frozen=True)
class MomentSet:
    """Sample moments driving every likelihood and baseline.

    Sigma_hat = X_c'X_c/n, Sigma_fit = X_c' P_F X_c / n, Sigma_res their
    difference, C_hat = X_c'(y - ybar)/n, all with the MLE divisor n.
    """

    xbar: np.ndarray
    Sigma_hat: np.ndarray
    Sigma_fit: np.ndarray
    Sigma_res: np.ndarray
    C_hat: np.ndarray
    n: int
    p: int
    r: int
    # X_c'F (F'F)^{-1}: coefficient matrix of the regression of X_c on F,
    # needed to recover beta_hat for a fitted span.
    Bxf: np.ndarray = field(default=None, repr=False)


def moments(data, basis):
    """Compute the MomentSet for a dataset and a design basis built from data.y."""
    X = data.X
    F = basis.F
    if F.shape[0] != data.n:
        raise InvalidInputError("basis row count does not match the dataset")
    n = data.n
    xbar = X.mean(axis=0)
    Xc = X - xbar
    Sigma_hat = symmetrize(Xc.T @ Xc / n)
    FtF = F.T @ F
    try:
        coef = np.linalg.solve(FtF, F.T @ Xc)  # r x p
    except np.linalg.LinAlgError:
        raise DegenerateBasisError("F'F is singular")
    fitted = F @ coef
    Sigma_fit = symmetrize(fitted.T @ fitted / n)
    Sigma_res = symmetrize(Sigma_hat - Sigma_fit)
    C_hat = Xc.T @ (data.y - data.y.mean()) / n
    return MomentSet(
        xbar=xbar,
        Sigma_hat=Sigma_hat,
        Sigma_fit=Sigma_fit,
        Sigma_res=Sigma_res,
        C_hat=C_hat,
        n=n,
        p=data.p,
        r=basis.r,
        Bxf=coef.T,
    )


@dataclass(frozen=True)
class FittedReduction:
    """Estimated inverse model: subspace, coordinates, and likelihood."""

    kind: str  # "PC" | "PFC_ISO" | "EXTENDED"
    d: int
    mu: np.ndarray
    Gamma: np.ndarray          # p x d, orthonormal columns
    Gamma0: np.ndarray         # p x (p-d), orthonormal completion
    beta: np.ndarray           # d x r (None for PC fits)
    Omega2: np.ndarray         # d x d PD
    Omega0_2: np.ndarray       # (p-d) x (p-d) PD
    loglik: float
    spec: BasisSpec
    converged: bool = True

    @property
    def p(self):
        return self.Gamma.shape[0]

    def model_covariance(self):
        """Implied Var(X|Y) = Gamma Omega^2 Gamma' + Gamma0 Omega0^2 Gamma0'."""
        S = self.Gamma @ self.Omega2 @ self.Gamma.T
        if self.Gamma0.shape[1] > 0:
            S = S + self.Gamma0 @ self.Omega0_2 @ self.Gamma0.T
        return symmetrize(S)


class ProfileObjective:
    """Precomputed pieces of the profile log-likelihood for one MomentSet.

    Exposes the minimized kernel f(S) = log|S'AS| + log|S'BS| with
    A = Sigma_res and B = Sigma_hat^{-1}, plus the affine map back to L(S).
    """

    def __init__(self, m):
        self.n = m.n
        self.p = m.p
        self.A = m.Sigma_res
        try:
            L = np.linalg.cholesky(m.Sigma_hat)
        except np.linalg.LinAlgError:
            raise SingularMatrixError("Sigma_hat is not positive definite")
        self.logdet_Sigma = 2.0 * float(np.sum(np.log(np.diag(L))))
        Linv = np.linalg.inv(L)
        self.B = symmetrize(Linv.T @ Linv)  # Sigma_hat^{-1}
        self.const = self.p * LOG_2PI + self.p + self.logdet_Sigma

    def loglik_from_kernel(self, f):
        return -(self.n / 2.0) * (self.const + f)

    def kernel(self, S):
        """f(S); raises SingularMatrixError naming the failing term."""
        S = np.asarray(S, dtype=float)
        out = 0.0
        for mat, label in ((self.A, "S'Sigma_res S"), (self.B, "S'Sigma_hat^{-1} S")):
            M = S.T @ mat @ S
            try:
                C = np.linalg.cholesky(symmetrize(M))
            except np.linalg.LinAlgError:
                raise SingularMatrixError(f"{label} is not positive definite")
            out += 2.0 * float(np.sum(np.log(np.diag(C))))
        return out

    def value(self, S):
        return self.loglik_from_kernel(self.kernel(S))


def profile_loglik(S, m):
    """Profile log-likelihood of the structured model at the span of S.

    Depends on S only through its column span; equals full_model_loglik when
    S is square orthogonal.
    """
    S = np.asarray(S, dtype=float)
    if S.shape[0] != m.p:
        raise InvalidInputError(f"S has {S.shape[0]} rows, expected {m.p}")
    return ProfileObjective(m).value(S)


def profile_loglik_completion_form(S, m):
    """Same value via the explicit orthonormal-completion formula (slow path).

    Kept as the cross-check for the determinant identity used by the fast path.
    """
    from .numerics import orthonormal_completion

    S = np.asarray(S, dtype=float)
    n, p = m.n, m.p
    f = logdet_pd(S.T @ m.Sigma_res @ S, "S'Sigma_res S")
    S0 = orthonormal_completion(S)
    if S0.shape[1] > 0:
        f += logdet_pd(S0.T @ m.Sigma_hat @ S0, "S0'Sigma_hat S0")
    return -(n / 2.0) * (p * LOG_2PI + p + f)


def full_model_loglik(m):
    """Maximized log-likelihood of the unstructured (d = p) inverse model."""
    return -(m.n / 2.0) * (
        m.p * LOG_2PI + m.p + logdet_pd(m.Sigma_res, "Sigma_res")
    )


def check_extended_sample_size(m):
    """Guard for extended-model fitting: requires n >= p + r + 2 and PD Sigma_hat."""
    if m.n < m.p + m.r + 2:
        raise InvalidInputError(
            f"extended fit needs n >= p + r + 2 (= {m.p + m.r + 2}), got n = {m.n}; "
            "screen or otherwise reduce predictors first"
        )
