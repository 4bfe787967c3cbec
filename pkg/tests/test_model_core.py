import numpy as np
import pytest
import scipy.optimize

from pfcr.errors import DegenerateBasisError, InvalidInputError
from pfcr.model_core import (
    BasisSpec,
    Dataset,
    ProfileObjective,
    build_basis,
    full_model_loglik,
    moments,
    profile_loglik,
    profile_loglik_completion_form,
)
from conftest import random_orthonormal


def make_data(rng, n=40, p=3):
    X = rng.standard_normal((n, p))
    y = X @ rng.standard_normal(p) + 0.5 * rng.standard_normal(n)
    return Dataset(X=X, y=y)


class TestDataset:
    def test_constant_column_rejected(self):
        X = np.column_stack([np.ones(5), np.arange(5.0)])
        with pytest.raises(InvalidInputError, match="constant"):
            Dataset(X=X, y=np.arange(5.0))

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            Dataset(X=np.random.randn(5, 2), y=np.arange(4.0))

    def test_nonfinite(self):
        X = np.random.randn(5, 2)
        X[0, 0] = np.inf
        with pytest.raises(InvalidInputError):
            Dataset(X=X, y=np.arange(5.0))


class TestBuildBasis:
    def test_linear_centered(self):
        b = build_basis([1.0, 2.0, 3.0], BasisSpec.polynomial(1))
        # standardized before powering, so proportional to the centered response
        col = b.F[:, 0]
        assert col.sum() == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(col / col[2], [-1.0, 0.0, 1.0])

    def test_two_slice_indicator(self):
        b = build_basis([0.0, 0.0, 1.0, 1.0], BasisSpec.sliced(2))
        assert b.F.shape == (4, 1)
        assert np.allclose(b.F[:, 0], [-0.5, -0.5, 0.5, 0.5])

    def test_cubic_vandermonde(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        b = build_basis(y, BasisSpec.polynomial(3))
        assert np.allclose(b.F.sum(axis=0), 0.0, atol=1e-9 * 4)
        assert np.linalg.matrix_rank(b.F) == 3
        # direct construction: standardized powers minus their means
        z = (y - y.mean()) / y.std()
        V = np.column_stack([z, z**2, z**3])
        assert np.allclose(b.F, V - V.mean(axis=0), atol=1e-12)

    def test_rank_deficient(self):
        with pytest.raises(DegenerateBasisError):
            build_basis([0.0, 0.0, 1.0, 1.0], BasisSpec.polynomial(2))

    def test_slice_ties_to_lower(self):
        # five equal values straddling the boundary all land in slice 0
        y = [1.0, 1.0, 1.0, 2.0, 3.0, 4.0]
        b = build_basis(y, BasisSpec.sliced(2))
        ind = b.F[:, 0] - b.F[:, 0].min()  # undo centering
        assert np.allclose(ind[:3], 0.0)

    def test_r_must_be_below_n(self):
        with pytest.raises(InvalidInputError):
            build_basis([1.0, 2.0, 3.0], BasisSpec.polynomial(3))


class TestMoments:
    def test_decomposition(self, rng):
        data = make_data(rng, n=30, p=4)
        m = moments(data, build_basis(data.y, BasisSpec.polynomial(2)))
        assert np.allclose(m.Sigma_hat, m.Sigma_fit + m.Sigma_res, atol=1e-9)

    def test_orthogonal_design_no_fit(self):
        # F exactly orthogonal to every centered X column
        F_raw = np.array([1.0, -1.0, 1.0, -1.0])
        X = np.column_stack([np.array([1.0, 1.0, -1.0, -1.0]),
                             np.array([1.0, 2.0, 3.0, 4.0])])
        X[:, 1] -= X[:, 1] @ F_raw / (F_raw @ F_raw) * F_raw
        y = F_raw  # linear basis reproduces F_raw up to scale
        data = Dataset(X=X, y=y)
        m = moments(data, build_basis(y, BasisSpec.polynomial(1)))
        assert np.allclose(m.Sigma_fit, 0.0, atol=1e-12)
        assert np.allclose(m.Sigma_res, m.Sigma_hat, atol=1e-12)

    def test_perfect_fit(self, rng):
        y = rng.standard_normal(12)
        basis = build_basis(y, BasisSpec.polynomial(1))
        B = rng.standard_normal((3, 1))
        X = basis.F @ B.T + 5.0  # X_c = F B' exactly
        data = Dataset(X=X, y=y)
        m = moments(data, basis)
        assert np.max(np.abs(m.Sigma_res)) < 1e-12

    def test_definitional_oracle(self, rng):
        n, p = 6, 2
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        data = Dataset(X=X, y=y)
        basis = build_basis(y, BasisSpec.polynomial(1))
        m = moments(data, basis)
        F = basis.F
        Xc = X - X.mean(axis=0)
        P = F @ np.linalg.inv(F.T @ F) @ F.T
        assert np.allclose(m.xbar, X.mean(axis=0))
        assert np.allclose(m.Sigma_hat, Xc.T @ Xc / n, atol=1e-12)
        assert np.allclose(m.Sigma_fit, Xc.T @ P @ Xc / n, atol=1e-12)
        assert np.allclose(m.Sigma_res, Xc.T @ (np.eye(n) - P) @ Xc / n, atol=1e-12)
        assert np.allclose(m.C_hat, Xc.T @ (y - y.mean()) / n, atol=1e-12)

    def test_translation_invariance(self, rng):
        data = make_data(rng, n=25, p=3)
        basis = build_basis(data.y, BasisSpec.polynomial(2))
        m1 = moments(data, basis)
        shifted = Dataset(X=data.X + np.array([10.0, -3.0, 0.5]), y=data.y)
        m2 = moments(shifted, basis)
        for attr in ("Sigma_hat", "Sigma_fit", "Sigma_res", "C_hat"):
            assert np.allclose(getattr(m1, attr), getattr(m2, attr), atol=1e-9)


class TestProfileLoglik:
    def test_d_equals_p_is_full_model(self, rng):
        data = make_data(rng, n=50, p=3)
        m = moments(data, build_basis(data.y, BasisSpec.polynomial(2)))
        S = random_orthonormal(rng, 3, 3)
        assert profile_loglik(S, m) == pytest.approx(full_model_loglik(m), abs=1e-8)

    def test_rotation_invariance(self, rng):
        data = make_data(rng, n=50, p=4)
        m = moments(data, build_basis(data.y, BasisSpec.polynomial(2)))
        S = random_orthonormal(rng, 4, 2)
        Q = np.linalg.qr(rng.standard_normal((2, 2)))[0]
        assert profile_loglik(S, m) == pytest.approx(profile_loglik(S @ Q, m), abs=1e-9)

    def test_identity_matches_completion_form(self, rng):
        data = make_data(rng, n=60, p=5)
        m = moments(data, build_basis(data.y, BasisSpec.polynomial(3)))
        for d in (1, 2, 4):
            S = random_orthonormal(rng, 5, d)
            assert profile_loglik(S, m) == pytest.approx(
                profile_loglik_completion_form(S, m), abs=1e-8
            )

    def test_nesting(self, rng):
        data = make_data(rng, n=50, p=4)
        m = moments(data, build_basis(data.y, BasisSpec.polynomial(2)))
        full = full_model_loglik(m)
        for d in (1, 2, 3):
            S = random_orthonormal(rng, 4, d)
            assert profile_loglik(S, m) <= full + 1e-6

    def test_inner_maximization_oracle(self, rng):
        """Profile value equals the numerically maximized exact likelihood at a fixed span."""
        n, p, d, r = 40, 3, 1, 1
        data = make_data(rng, n=n, p=p)
        basis = build_basis(data.y, BasisSpec.polynomial(r))
        m = moments(data, basis)
        S = random_orthonormal(rng, p, d)
        from pfcr.numerics import orthonormal_completion

        S0 = orthonormal_completion(S)
        F = basis.F
        X = data.X

        def negloglik(theta):
            mu = theta[:p]
            beta = theta[p:p + d * r].reshape(d, r)
            lw = theta[p + d * r]                   # log sd of the S block
            L0 = np.zeros((p - d, p - d))
            tri = theta[p + d * r + 1:]
            idx = np.tril_indices(p - d)
            L0[idx] = tri
            L0[np.diag_indices(p - d)] = np.exp(np.diag(L0))
            Omega2 = np.exp(2 * lw) * np.eye(d)
            Omega02 = L0 @ L0.T
            Delta = S @ Omega2 @ S.T + S0 @ Omega02 @ S0.T
            try:
                C = np.linalg.cholesky(Delta)
            except np.linalg.LinAlgError:
                return 1e12
            mean = mu + F @ beta.T @ S.T
            W = np.linalg.solve(C, (X - mean).T)
            quad = float(np.sum(W * W))
            logdet = 2 * float(np.sum(np.log(np.diag(C))))
            return 0.5 * (n * (p * np.log(2 * np.pi) + logdet) + quad)

        k0 = (p - d) * (p - d + 1) // 2
        best = np.inf
        for trial in range(4):
            x0 = np.concatenate([data.X.mean(axis=0), 0.1 * rng.standard_normal(d * r),
                                 [0.0], 0.1 * rng.standard_normal(k0)])
            res = scipy.optimize.minimize(negloglik, x0, method="Nelder-Mead",
                                          options={"maxiter": 20000, "xatol": 1e-10,
                                                   "fatol": 1e-12})
            best = min(best, res.fun)
        oracle = -best
        prof = profile_loglik(S, m)
        assert oracle <= prof + 1e-6          # profile is the true inner max
        assert prof == pytest.approx(oracle, abs=1e-3)


class TestFullModelLoglik:
    def test_matches_profile_identity(self, rng):
        data = make_data(rng, n=30, p=3)
        m = moments(data, build_basis(data.y, BasisSpec.polynomial(1)))
        assert full_model_loglik(m) == pytest.approx(
            profile_loglik(np.eye(3), m), abs=1e-10
        )

    def test_numerical_mle_oracle(self, rng):
        """Matches the exact inverse-model MLE with unstructured covariance."""
        n, p, r = 10, 2, 1
        data = make_data(rng, n=n, p=p)
        basis = build_basis(data.y, BasisSpec.polynomial(r))
        m = moments(data, basis)
        F, X = basis.F, data.X

        def negloglik(theta):
            mu = theta[:p]
            B = theta[p:p + p * r].reshape(p, r)
            L = np.zeros((p, p))
            idx = np.tril_indices(p)
            L[idx] = theta[p + p * r:]
            L[np.diag_indices(p)] = np.exp(np.diag(L))
            Sigma = L @ L.T
            C = np.linalg.cholesky(Sigma)
            mean = mu + F @ B.T
            W = np.linalg.solve(C, (X - mean).T)
            return 0.5 * (n * (p * np.log(2 * np.pi)
                               + 2 * np.sum(np.log(np.diag(C))))
                          + float(np.sum(W * W)))

        x0 = np.concatenate([X.mean(axis=0), np.zeros(p * r), np.zeros(p * (p + 1) // 2)])
        res = scipy.optimize.minimize(negloglik, x0, method="Nelder-Mead",
                                      options={"maxiter": 50000, "xatol": 1e-11,
                                               "fatol": 1e-13})
        assert full_model_loglik(m) == pytest.approx(-res.fun, abs=1e-4)

    def test_rotation_equivariance(self, rng):
        data = make_data(rng, n=30, p=3)
        basis = build_basis(data.y, BasisSpec.polynomial(2))
        Q = np.linalg.qr(rng.standard_normal((3, 3)))[0]
        rotated = Dataset(X=data.X @ Q, y=data.y)
        l1 = full_model_loglik(moments(data, basis))
        l2 = full_model_loglik(moments(rotated, basis))
        assert l1 == pytest.approx(l2, abs=1e-7)


def test_profile_objective_singularity_names_term(rng):
    data = make_data(rng, n=30, p=3)
    m = moments(data, build_basis(data.y, BasisSpec.polynomial(1)))
    obj = ProfileObjective(m)
    from pfcr.errors import SingularMatrixError

    with pytest.raises(SingularMatrixError, match="Sigma"):
        obj.kernel(np.zeros((3, 1)))
