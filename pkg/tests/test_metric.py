import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inpaintkit.metric import (
    DistortionReport,
    LatentSet,
    chi2_reference,
    dataset_distortion,
    mean_sq_distortion,
    nsd_estimate,
    pairwise_sq_distortion,
    sq_distance_samples,
    standardize_latents,
)


def random_set(rng, n=None, dim=None, ident="img"):
    n = int(rng.integers(2, 65)) if n is None else n
    dim = int(rng.integers(1, 33)) if dim is None else dim
    return LatentSet(ident, rng.standard_normal((n, dim)))


class TestPairwise:
    def test_two_point_hand_value(self):
        ls = LatentSet("p", np.array([[1.0], [-1.0]]))
        assert pairwise_sq_distortion(ls) == pytest.approx(2.0, rel=1e-15)

    def test_identical_latents_zero(self):
        ls = LatentSet("p", np.tile([1.5, -2.0, 0.25], (7, 1)))
        assert pairwise_sq_distortion(ls) == 0.0

    def test_single_latent_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            pairwise_sq_distortion(LatentSet("p", np.ones((1, 3))))


class TestEstimatorEquivalence:
    def test_fifty_random_sets(self):
        # the quadratic pairwise sum is the oracle for the linear-cost form
        rng = np.random.default_rng(42)
        for _ in range(50):
            ls = random_set(rng)
            a = pairwise_sq_distortion(ls)
            b = mean_sq_distortion(ls)
            assert abs(a - b) <= 1e-9 * max(1.0, abs(a))

    def test_hand_value_matches(self):
        ls = LatentSet("p", np.array([[1.0], [-1.0]]))
        assert mean_sq_distortion(ls) == pytest.approx(2.0, rel=1e-15)

    def test_constant_set_zero(self):
        v = np.array([0.3, -0.7])
        assert mean_sq_distortion(LatentSet("p", np.tile(v, (5, 1)))) == 0.0


class TestDatasetDistortion:
    def test_single_value(self):
        assert dataset_distortion([2.0]) == 2.0

    def test_two_values(self):
        assert dataset_distortion([0.0, 4.0]) == 2.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            dataset_distortion([])

    def test_matches_exact_rational_mean(self):
        # independent oracle: exact arithmetic via Fractions
        rng = np.random.default_rng(3)
        values = rng.uniform(0, 10, size=250).tolist()
        exact = float(sum(Fraction(v) for v in values) / len(values))
        assert dataset_distortion(values) == pytest.approx(exact, abs=1e-12)


class TestNsdEstimate:
    def test_hand_value(self):
        rep = nsd_estimate([LatentSet("p", np.array([[1.0], [-1.0]]))], D=1)
        assert rep.nsd_mean == pytest.approx(1.0, rel=1e-15)
        assert rep.k == 1 and rep.n == 2 and rep.D == 1
        assert rep.nsd_std == 0.0

    def test_identical_latents_give_zero(self):
        sets = [
            LatentSet(f"p{j}", np.tile(np.random.default_rng(j).normal(size=4), (6, 1)))
            for j in range(5)
        ]
        rep = nsd_estimate(sets, D=4)
        assert rep.nsd_mean == 0.0
        assert rep.dataset_dist2 == 0.0

    def test_standard_normal_latents_calibrate_to_one(self):
        rng = np.random.default_rng(2024)
        sets = [LatentSet(f"p{j}", rng.standard_normal((100, 64))) for j in range(50)]
        rep = nsd_estimate(sets, D=64)
        assert 0.95 <= rep.nsd_mean <= 1.05

    def test_heterogeneous_n_rejected(self):
        rng = np.random.default_rng(0)
        sets = [random_set(rng, n=4, dim=3), random_set(rng, n=5, dim=3)]
        with pytest.raises(ValueError, match="mask count"):
            nsd_estimate(sets, D=3)

    def test_heterogeneous_dim_rejected(self):
        rng = np.random.default_rng(0)
        sets = [random_set(rng, n=4, dim=3), random_set(rng, n=4, dim=2)]
        with pytest.raises(ValueError, match="latent dim"):
            nsd_estimate(sets, D=3)

    def test_declared_dim_must_match(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError, match="declared D"):
            nsd_estimate([random_set(rng, n=4, dim=3)], D=7)

    def test_std_is_sample_std_over_images(self):
        rng = np.random.default_rng(5)
        sets = [random_set(rng, n=8, dim=4, ident=f"p{j}") for j in range(12)]
        rep = nsd_estimate(sets, D=4)
        per = np.array(rep.per_image_nsd)
        assert rep.nsd_std == pytest.approx(per.std(ddof=1), rel=1e-12)

    def test_report_is_internally_consistent(self):
        rng = np.random.default_rng(6)
        sets = [random_set(rng, n=8, dim=4, ident=f"p{j}") for j in range(9)]
        rep = nsd_estimate(sets, D=4)
        assert rep.dataset_dist2 == pytest.approx(np.mean(rep.per_image_dist2), rel=1e-14)
        assert rep.nsd_mean == pytest.approx(rep.dataset_dist2 / 8.0, rel=1e-14)


class TestReportValidation:
    def test_inconsistent_mean_rejected(self):
        with pytest.raises(ValueError, match="mean"):
            DistortionReport(per_image_dist2=(1.0, 3.0), dataset_dist2=5.0,
                             nsd_mean=2.5, nsd_std=0.0, D=1, n=2, k=2)

    def test_inconsistent_nsd_rejected(self):
        with pytest.raises(ValueError, match="nsd_mean"):
            DistortionReport(per_image_dist2=(1.0, 3.0), dataset_dist2=2.0,
                             nsd_mean=2.0, nsd_std=0.0, D=1, n=2, k=2)

    def test_negative_distortion_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            DistortionReport(per_image_dist2=(-1.0, 3.0), dataset_dist2=1.0,
                             nsd_mean=0.5, nsd_std=0.0, D=1, n=2, k=2)

    def test_summary_line_format(self):
        rep = DistortionReport(per_image_dist2=(1.0, 3.0), dataset_dist2=2.0,
                               nsd_mean=1.0, nsd_std=0.5, D=1, n=2, k=2,
                               mask_strategy="central")
        line = rep.summary_line()
        assert line.startswith("nsd = 1.000000 ± 0.500000")
        assert "(D=1, n=2, k=2, masks=central, standardized=no)" in line


class TestChi2Reference:
    def test_one_dimensional(self):
        est = chi2_reference(1, 10**6, np.random.default_rng(0))
        assert est == pytest.approx(2.0, rel=0.01)

    def test_sixty_four_dimensional(self):
        est = chi2_reference(64, 10**5, np.random.default_rng(1))
        assert est == pytest.approx(128.0, rel=0.02)

    def test_variance_matches_chi_squared(self):
        # var(chi^2_D) = 2 D; half the squared distance is chi^2_D
        for D in (4, 32):
            s = sq_distance_samples(D, 10**5, np.random.default_rng(D)) / 2.0
            assert s.var() == pytest.approx(2 * D, rel=0.05)

    def test_minimum_samples_enforced(self):
        with pytest.raises(ValueError, match="1000"):
            chi2_reference(4, 10, np.random.default_rng(0))


class TestStandardize:
    def test_idempotent_on_standardized_data(self):
        rng = np.random.default_rng(0)
        sets = [LatentSet(f"p{j}", rng.standard_normal((200, 8))) for j in range(4)]
        once, _ = standardize_latents(sets)
        twice, _ = standardize_latents(once)
        for a, b in zip(once, twice):
            np.testing.assert_allclose(a.latents, b.latents, atol=2e-2)

    def test_constant_dimension_maps_to_zero(self):
        data = np.ones((10, 3))
        data[:, 1] = np.arange(10)
        out, stats = standardize_latents([LatentSet("p", data)])
        assert (out[0].latents[:, 0] == 0).all()
        assert (out[0].latents[:, 2] == 0).all()
        assert stats.degenerate.tolist() == [True, False, True]

    def test_pooled_moments_after_transform(self):
        rng = np.random.default_rng(9)
        sets = [
            LatentSet(f"p{j}", 3.0 * rng.standard_normal((50, 6)) + rng.uniform(-5, 5, 6))
            for j in range(6)
        ]
        out, _ = standardize_latents(sets)
        pooled = np.concatenate([s.latents for s in out])
        np.testing.assert_allclose(pooled.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(pooled.std(axis=0), 1.0, atol=1e-12)

    def test_exact_inversion_from_stats(self):
        rng = np.random.default_rng(10)
        sets = [LatentSet("p", rng.uniform(-4, 4, (20, 5)))]
        out, stats = standardize_latents(sets)
        restored = out[0].latents * stats.std + stats.mean
        np.testing.assert_allclose(restored, sets[0].latents, rtol=1e-12, atol=1e-12)


class TestMetricProperties:
    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_translation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        ls = random_set(rng, n=6, dim=5)
        shift = rng.uniform(-10, 10, 5)
        shifted = LatentSet("p", ls.latents + shift)
        a, b = mean_sq_distortion(ls), mean_sq_distortion(shifted)
        assert b == pytest.approx(a, rel=1e-9, abs=1e-12)

    @given(st.integers(0, 2**31 - 1), st.floats(0.01, 100.0))
    @settings(max_examples=40, deadline=None)
    def test_scale_equivariance(self, seed, scale):
        rng = np.random.default_rng(seed)
        ls = random_set(rng, n=6, dim=5)
        scaled = LatentSet("p", ls.latents * scale)
        assert mean_sq_distortion(scaled) == pytest.approx(
            scale * scale * mean_sq_distortion(ls), rel=1e-9
        )

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        ls = random_set(rng, n=10, dim=4)
        perm = rng.permutation(10)
        shuffled = LatentSet("p", ls.latents[perm])
        assert mean_sq_distortion(shuffled) == pytest.approx(
            mean_sq_distortion(ls), rel=1e-12
        )
        assert pairwise_sq_distortion(shuffled) == pytest.approx(
            pairwise_sq_distortion(ls), rel=1e-12
        )

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_non_negative(self, seed):
        rng = np.random.default_rng(seed)
        assert mean_sq_distortion(random_set(rng)) >= 0.0

    def test_non_finite_latents_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            LatentSet("p", np.array([[1.0, np.nan], [0.0, 1.0]]))
