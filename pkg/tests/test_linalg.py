import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nclab.errors import DegeneracyError, DimensionError, NotPSDError
from nclab.linalg import (SeedSpec, frobenius, gaussian_matrix, haar_orthogonal, load_matrix_csv, matmul,
                          qr_decompose, save_matrix_csv, solve_ridge, sym_sqrt, trace, transpose)


class TestSeedSpec:
    def test_same_seed_same_stream(self):
        a = SeedSpec(3, 1).rng().standard_normal(5)
        b = SeedSpec(3, 1).rng().standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = SeedSpec(3, 1).rng().standard_normal(5)
        b = SeedSpec(3, 2).rng().standard_normal(5)
        assert not np.array_equal(a, b)

    def test_child_is_deterministic_and_distinct(self):
        s = SeedSpec(3, 1)
        assert s.child(4) == s.child(4)
        assert s.child(4) != s.child(5)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            SeedSpec(-1, 0)


class TestGaussianMatrix:
    def test_bitwise_deterministic(self):
        np.testing.assert_array_equal(gaussian_matrix(2, 2, SeedSpec(1)), gaussian_matrix(2, 2, SeedSpec(1)))

    def test_moments(self):
        g = gaussian_matrix(1000, 1, SeedSpec(5)).ravel()
        assert abs(g.mean()) < 0.1
        assert abs(g.var() - 1.0) < 0.15

    @pytest.mark.parametrize("shape", [(0, 3), (3, 0)])
    def test_zero_dimension(self, shape):
        with pytest.raises(DimensionError):
            gaussian_matrix(*shape, SeedSpec(0))


class TestHaar:
    def test_rows_orthonormal(self):
        q = haar_orthogonal(3, 5, SeedSpec(2))
        assert q.shape == (3, 5)
        np.testing.assert_allclose(q @ q.T, np.eye(3), atol=1e-12)

    def test_one_by_one(self):
        q = haar_orthogonal(1, 1, SeedSpec(4))
        assert abs(abs(q[0, 0]) - 1.0) < 1e-15

    def test_k_greater_than_p(self):
        with pytest.raises(DimensionError):
            haar_orthogonal(4, 3, SeedSpec(0))

    def test_mean_projection_is_isotropic(self):
        # E[Q^T Q] = (k/p) I by rotation invariance
        k, p, draws = 2, 8, 2000
        acc = np.zeros((p, p))
        for j in range(draws):
            q = haar_orthogonal(k, p, SeedSpec(11, j))
            acc += q.T @ q
        assert np.max(np.abs(acc / draws - (k / p) * np.eye(p))) < 0.03

    def test_sign_correction_matters(self):
        # without folding R's signs into Q, the first entry of a 1 x p draw
        # from numpy's QR is biased; with it the mean is ~0
        firsts = [haar_orthogonal(1, 3, SeedSpec(12, j))[0, 0] for j in range(4000)]
        assert abs(np.mean(firsts)) < 0.03

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 256).flatmap(lambda p: st.tuples(st.integers(1, p), st.just(p))),
           st.integers(0, 2**32))
    def test_orthonormal_property(self, kp, base):
        k, p = kp
        q = haar_orthogonal(k, p, SeedSpec(base))
        assert np.max(np.abs(q @ q.T - np.eye(k))) < 1e-12

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**63))
    def test_seed_changes_orientation_not_orthonormality(self, base):
        a = haar_orthogonal(4, 9, SeedSpec(base))
        b = haar_orthogonal(4, 9, SeedSpec(base ^ 1))
        assert not np.array_equal(a, b)
        assert np.max(np.abs(b @ b.T - np.eye(4))) < 1e-12


class TestQR:
    def test_identity(self):
        q, r = qr_decompose(np.eye(3))
        np.testing.assert_allclose(q, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(r, np.eye(3), atol=1e-15)

    def test_zero_matrix_is_degenerate(self):
        with pytest.raises(DegeneracyError):
            qr_decompose(np.zeros((2, 2)))

    def test_rank_deficient(self):
        a = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
        with pytest.raises(DegeneracyError):
            qr_decompose(a)

    def test_reconstruction(self):
        a = gaussian_matrix(5, 3, SeedSpec(8))
        q, r = qr_decompose(a)
        assert np.linalg.norm(q @ r - a) / np.linalg.norm(a) < 1e-12
        assert np.all(np.diag(r) >= 0)
        np.testing.assert_allclose(np.tril(r, -1), 0.0)
        np.testing.assert_allclose(q.T @ q, np.eye(3), atol=1e-12)

    def test_wide_rejected(self):
        with pytest.raises(DimensionError):
            qr_decompose(np.ones((2, 3)))


class TestRidge:
    def test_exact_interpolation(self):
        np.testing.assert_allclose(solve_ridge(np.eye(3), np.eye(3), 0.0), np.eye(3), atol=1e-14)

    def test_shrinkage(self):
        np.testing.assert_allclose(solve_ridge(np.eye(2), [[1.0], [1.0]], 1.0), [[0.5], [0.5]], atol=1e-15)

    def test_normal_equations(self):
        a = gaussian_matrix(50, 5, SeedSpec(1))
        b = gaussian_matrix(50, 2, SeedSpec(2))
        lam = 1e-3
        beta = solve_ridge(a, b, lam)
        resid = (a.T @ a + lam * np.eye(5)) @ beta - a.T @ b
        assert np.max(np.abs(resid)) < 1e-10

    def test_singular_at_zero_lambda(self):
        a = np.array([[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]])
        with pytest.raises(DegeneracyError):
            solve_ridge(a, np.ones((3, 1)), 0.0)
        solve_ridge(a, np.ones((3, 1)), 0.1)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32), st.floats(1e-4, 10.0))
    def test_is_minimizer(self, base, lam):
        a = gaussian_matrix(20, 4, SeedSpec(base, 0))
        b = gaussian_matrix(20, 1, SeedSpec(base, 1))
        beta = solve_ridge(a, b, lam)

        def loss(x):
            return float(np.sum((a @ x - b) ** 2) + lam * np.sum(x ** 2))

        rng = np.random.default_rng(base)
        for _ in range(5):
            d = rng.standard_normal(beta.shape)
            d *= 1e-4 / np.linalg.norm(d)
            assert loss(beta + d) >= loss(beta)


class TestPooledOps:
    def test_basic(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert trace(a) == 5.0
        assert frobenius(a) == pytest.approx(np.sqrt(30.0))
        np.testing.assert_array_equal(matmul(a, np.eye(2)), a)
        np.testing.assert_array_equal(transpose(a), a.T)
        with pytest.raises(DimensionError):
            matmul(a, np.ones((3, 1)))

    def test_sqrt_identity(self):
        np.testing.assert_allclose(sym_sqrt(np.eye(5)), np.eye(5), atol=1e-15)

    def test_sqrt_diag(self):
        np.testing.assert_allclose(sym_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)

    def test_sqrt_random_psd(self):
        g = gaussian_matrix(6, 4, SeedSpec(3))
        a = g @ g.T
        s = sym_sqrt(a)
        assert np.linalg.norm(s @ s - a) < 1e-8

    def test_sqrt_clamps_roundoff(self):
        a = np.diag([1.0, -5e-11])
        np.testing.assert_allclose(sym_sqrt(a), np.diag([1.0, 0.0]))

    def test_sqrt_not_psd(self):
        with pytest.raises(NotPSDError):
            sym_sqrt(np.diag([1.0, -1e-6]))


class TestMatrixCsv:
    def test_round_trip_exact(self, tmp_path):
        a = gaussian_matrix(4, 3, SeedSpec(9))
        save_matrix_csv(tmp_path / "a.csv", a)
        np.testing.assert_array_equal(load_matrix_csv(tmp_path / "a.csv"), a)

    def test_ragged_rejected(self, tmp_path):
        (tmp_path / "r.csv").write_text("1,2,3\n4,5\n")
        with pytest.raises(ValueError, match="ragged"):
            load_matrix_csv(tmp_path / "r.csv")
