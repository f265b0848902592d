import numpy as np
import pytest

from nclab.errors import NotPSDError, ParameterError
from nclab.gmm import (GmmSpec, LabeledDataset, ShiftSpec, interpolated_rotation, isotropic_spec,
                       make_shifted_domain, random_spec, sample_gmm, sample_sphere)
from nclab.linalg import SeedSpec


class TestSphere:
    def test_radius(self):
        z = sample_sphere(4, 1, SeedSpec(0))
        assert abs(np.linalg.norm(z) - 2.0) < 1e-12

    def test_zero_sphere(self):
        z = sample_sphere(1, 10, SeedSpec(1))
        assert set(np.unique(z)) <= {-1.0, 1.0}

    def test_second_moment(self):
        z = sample_sphere(8, 20000, SeedSpec(2))
        assert np.max(np.abs(z @ z.T / z.shape[1] - np.eye(8))) < 0.05

    @pytest.mark.parametrize("p", [1, 2, 3, 17, 128, 512])
    def test_norm_invariant(self, p):
        z = sample_sphere(p, 200, SeedSpec(p))
        assert np.max(np.abs(np.linalg.norm(z, axis=0) - np.sqrt(p))) < 1e-12


class TestSampleGmm:
    def test_zero_noise(self):
        means = np.arange(12, dtype=float).reshape(4, 3)
        spec = isotropic_spec(means, sigma2=0.0)
        ds = sample_gmm(spec, 3, SeedSpec(0))
        np.testing.assert_array_equal(ds.x, means[:, ds.labels])
        assert sorted(ds.labels) == [0, 1, 2]

    def test_moments_single_class(self):
        spec = isotropic_spec(np.zeros((4, 1)), sigma2=1.0)
        ds = sample_gmm(spec, 50000, SeedSpec(3))
        assert np.max(np.abs(ds.x.mean(axis=1))) < 0.05
        assert np.max(np.abs(np.cov(ds.x, bias=True) - np.eye(4))) < 0.05

    def test_stratified_counts(self):
        spec = isotropic_spec(np.array([[1.0, -1.0]]), priors=[0.5, 0.5])
        counts = {tuple(sample_gmm(spec, 101, SeedSpec(s)).counts()) for s in range(30)}
        assert counts == {(50, 51), (51, 50)}
        a = sample_gmm(spec, 101, SeedSpec(4)).counts()
        b = sample_gmm(spec, 101, SeedSpec(4)).counts()
        np.testing.assert_array_equal(a, b)

    def test_uneven_priors(self):
        spec = isotropic_spec(np.eye(3), priors=[0.2, 0.3, 0.5])
        np.testing.assert_array_equal(sample_gmm(spec, 10, SeedSpec(0)).counts(), [2, 3, 5])

    def test_onehot(self):
        ds = sample_gmm(random_spec(3, 5, SeedSpec(1)), 60, SeedSpec(2))
        np.testing.assert_array_equal(ds.onehot.sum(axis=1), np.ones(60))
        np.testing.assert_array_equal(ds.onehot.sum(axis=0), ds.counts())

    def test_not_psd_rejected(self):
        with pytest.raises(NotPSDError):
            GmmSpec(np.zeros((2, 1)), (np.diag([1.0, -1.0]),), [1.0])

    def test_gaussian_noise_flag(self):
        spec = isotropic_spec(np.zeros((3, 1)))
        ds = sample_gmm(spec, 200, SeedSpec(5), noise="gaussian")
        norms = np.linalg.norm(ds.x, axis=0)
        assert norms.std() > 0.1  # radii vary, unlike the sphere model

    def test_within_class_cov_converges(self):
        spec = random_spec(2, 4, SeedSpec(6), anisotropy=2.0)

        def err(n, s):
            ds = sample_gmm(spec, n, SeedSpec(s, n))
            x0 = ds.x[:, ds.labels == 0]
            return np.max(np.abs(np.cov(x0, bias=True) - spec.covs[0]))

        small = np.median([err(1000, s) for s in range(10)])
        large = np.median([err(10000, s) for s in range(10)])
        assert small / large >= 2.0

    def test_dataset_csv_round_trip(self, tmp_path):
        ds = sample_gmm(random_spec(3, 4, SeedSpec(1)), 30, SeedSpec(2))
        ds.save_csv(tmp_path / "d.csv")
        header = (tmp_path / "d.csv").read_text().splitlines()[0]
        assert header == "f0,f1,f2,f3,label"
        back = LabeledDataset.load_csv(tmp_path / "d.csv")
        np.testing.assert_array_equal(back.x, ds.x)
        np.testing.assert_array_equal(back.labels, ds.labels)


class TestShift:
    def test_identity_shift(self):
        spec = random_spec(3, 6, SeedSpec(1), anisotropy=1.0)
        out = make_shifted_domain(spec, ShiftSpec(0, 0, 1), SeedSpec(2))
        np.testing.assert_allclose(out.means, spec.means, atol=1e-12)
        for a, b in zip(out.covs, spec.covs):
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_cov_scale(self):
        spec = random_spec(3, 6, SeedSpec(1))
        out = make_shifted_domain(spec, ShiftSpec(0, 0, 2), SeedSpec(2))
        for a, b in zip(out.covs, spec.covs):
            assert np.trace(a) == pytest.approx(2 * np.trace(b))

    def test_rotation_preserves_spectrum(self):
        spec = random_spec(2, 5, SeedSpec(3), anisotropy=3.0)
        out = make_shifted_domain(spec, ShiftSpec(0.6, 0, 1), SeedSpec(4))
        np.testing.assert_allclose(np.linalg.eigvalsh(out.covs[0]), np.linalg.eigvalsh(spec.covs[0]), atol=1e-10)

    def test_interpolated_rotation_is_orthogonal(self):
        for s in (0.0, 0.3, 0.7, 1.0):
            r = interpolated_rotation(7, s, SeedSpec(5))
            np.testing.assert_allclose(r @ r.T, np.eye(7), atol=1e-10)
        np.testing.assert_array_equal(interpolated_rotation(7, 0.0, SeedSpec(5)), np.eye(7))

    def test_rotation_strength_moves_further(self):
        d = [np.linalg.norm(interpolated_rotation(8, s, SeedSpec(9)) - np.eye(8)) for s in (0.1, 0.5, 0.9)]
        assert d[0] < d[1] < d[2]

    def test_full_shift_displacement(self):
        spec = random_spec(4, 16, SeedSpec(10))
        hits = 0
        for s in range(1000):
            out = make_shifted_domain(spec, ShiftSpec(1, 1, 1), SeedSpec(s, 77))
            disp = np.linalg.norm(out.means - spec.means, axis=0)
            hits += bool(np.all(disp >= 0.5))
        assert hits / 1000 >= 0.99

    @pytest.mark.parametrize("bad", [(-0.1, 0, 1), (1.1, 0, 1), (0, -1, 1), (0, 0, 0)])
    def test_invalid(self, bad):
        with pytest.raises(ParameterError):
            ShiftSpec(*bad)

    def test_domain_label(self):
        assert not ShiftSpec(0.4, 0.9, 3.0).is_out_of_domain
        assert ShiftSpec(0.5, 0, 1).is_out_of_domain
        assert ShiftSpec(0, 1.0, 1).is_out_of_domain
