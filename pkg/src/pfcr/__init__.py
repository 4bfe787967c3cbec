"""Likelihood-based sufficient dimension reduction for regression.

Fits normal inverse-regression models (principal components, principal fitted
components, and the structured-covariance extension) by Grassmann-manifold
maximum likelihood, tests and selects the reduction dimension, predicts the
response through the fitted inverse model, and benchmarks against OLS, partial
least squares, and supervised principal components.
"""

from .model_core import (
    BasisSpec,
    Dataset,
    DesignBasis,
    FittedReduction,
    MomentSet,
    build_basis,
    full_model_loglik,
    moments,
    profile_loglik,
)
from .estimation import (
    GrassmannOptions,
    TestResult,
    fit_extended,
    fit_pc,
    fit_pfc_iso,
    lrt_dimension,
    reduce,
    select_dimension,
)
from .prediction import build_predictor, forward_mean, log_inverse_density, residuals
from .baselines import (
    ols_coeffs,
    pls_coeffs,
    projected_ols,
    r2_between,
    screen_predictors,
    spc,
    standardized_pc,
)
from .numerics import chi2_sf, log_sum_exp, principal_angles, sym_eigen
from .errors import (
    DegenerateBasisError,
    DegenerateInputError,
    InvalidInputError,
    PfcrError,
    SingularMatrixError,
)

__version__ = "0.1.0"
