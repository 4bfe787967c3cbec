import numpy as np
import pytest

from pfcr.model_core import BasisSpec
from pfcr.studylab import InverseSim


def random_pd(rng, p, cond=10.0):
    """Random symmetric PD matrix with controlled conditioning."""
    Q = np.linalg.qr(rng.standard_normal((p, p)))[0]
    lam = np.linspace(cond, 1.0, p)
    return Q * lam @ Q.T


def random_orthonormal(rng, p, d):
    return np.linalg.qr(rng.standard_normal((p, d)))[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_inverse_sim(seed=0, p=6, d=2, r=3, signal=2.0,
                     omega0_diag=(4.0, 2.0, 1.0, 0.25)):
    """Anisotropic structured-model generator used across the suite."""
    g = np.random.default_rng(seed)
    Gamma = random_orthonormal(g, p, d)
    return InverseSim(
        mu=np.zeros(p),
        Gamma=Gamma,
        beta_mat=signal * g.standard_normal((d, r)),
        Omega2=np.diag(np.linspace(1.0, 0.5, d)),
        Omega0_2=np.diag(omega0_diag[: p - d]),
        spec=BasisSpec.polynomial(r),
    )
