"""Forward mean estimation through the fitted inverse model.

E(Y|X=x) is estimated as a density-weighted average of the training responses,

    Ehat(Y|X=x) = sum_i y_i N(x | y_i) / sum_i N(x | y_i),

where N(.|y_i) is the fitted normal density of X given Y = y_i. The weights
are a softmax over log densities (log-sum-exp shifted), so arbitrarily remote
query points cannot underflow, and the constant terms of the density cancel.

Why the prediction uses x only through the reduction: the log-density
difference between two training points i and j is

    log N(x|y_i) - log N(x|y_j) = (m_i - m_j)' D^{-1} x + const,

with m_i = mu + Gamma beta f_i and D the fitted covariance, and
m_i - m_j = Gamma beta (f_i - f_j) lies in span(Gamma). Hence the weights
depend on x only through Gamma' D^{-1} (x - mu); perturbing x orthogonally to
that functional leaves every weight unchanged.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SingularMatrixError
from .model_core import LOG_2PI
from .numerics import log_sum_exp


@dataclass(frozen=True)
class Predictor:
    """Immutable forward-mean predictor built from a fitted inverse model."""

    fit: "FittedReduction"
    train_y: np.ndarray
    cond_means: np.ndarray     # n x p: mu + Gamma beta f_{y_i}
    chol: np.ndarray           # Cholesky factor of the fitted covariance
    logdet: float

    @property
    def p(self):
        return self.cond_means.shape[1]


def build_predictor(fit, basis, train_y):
    """Assemble a Predictor from a fit and the training design it was built on."""
    train_y = np.asarray(train_y, dtype=float).ravel()
    if basis.F.shape[0] != train_y.shape[0]:
        raise InvalidInputError("design rows and training responses are misaligned")
    if fit.beta is None:
        raise InvalidInputError(f"{fit.kind} fit carries no inverse mean coefficients")
    cond_means = fit.mu + basis.F @ fit.beta.T @ fit.Gamma.T
    Sigma_model = fit.model_covariance()
    try:
        chol = np.linalg.cholesky(Sigma_model)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("fitted model covariance is not positive definite")
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return Predictor(
        fit=fit, train_y=train_y, cond_means=cond_means, chol=chol, logdet=logdet
    )


def _log_densities(pred, x):
    """Log N(x | y_i) for every training point i, in one triangular solve."""
    diffs = (x - pred.cond_means).T  # p x n
    w = np.linalg.solve(pred.chol, diffs)  # whitening solve against the factor
    quad = np.sum(w * w, axis=0)
    return -0.5 * (pred.p * LOG_2PI + pred.logdet + quad)


def log_inverse_density(pred, x, i):
    """Log of the fitted normal density of X given Y = y_i, evaluated at x."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != pred.p:
        raise InvalidInputError(f"x has length {x.shape[0]}, expected {pred.p}")
    if not 0 <= i < pred.train_y.shape[0]:
        raise InvalidInputError(f"training index {i} out of range")
    diff = x - pred.cond_means[i]
    w = np.linalg.solve(pred.chol, diff)
    return -0.5 * (pred.p * LOG_2PI + pred.logdet + float(w @ w))


def prediction_weights(pred, x):
    """Softmax weights over training points; nonnegative, sum to 1."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != pred.p:
        raise InvalidInputError(f"x has length {x.shape[0]}, expected {pred.p}")
    logs = _log_densities(pred, x)
    return np.exp(logs - log_sum_exp(logs))


def forward_mean(pred, x):
    """Ehat(Y | X = x); always within [min train_y, max train_y]."""
    w = prediction_weights(pred, x)
    return float(w @ pred.train_y)


def residuals(pred, data):
    """Diagnostic residuals y_i - Ehat(Y|X=x_i) plus the reduced coordinates.

    Returns (residuals, reduced) where reduced = Gamma'(x_i - mu) row-wise,
    ready for plotting by the CLI.
    """
    if data.p != pred.p:
        raise InvalidInputError(
            f"dataset has p = {data.p}, predictor expects {pred.p}"
        )
    yhat = np.array([forward_mean(pred, x) for x in data.X])
    reduced = (data.X - pred.fit.mu) @ pred.fit.Gamma
    return data.y - yhat, reduced
