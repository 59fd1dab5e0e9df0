import numpy as np
import pytest

from jabkit import (
    ConfigInvalid,
    IndexSample,
    MatchVariant,
    RngKey,
    SamplingMode,
    draw_B,
    draw_sample,
    exclusion_probability,
    keep_probability,
    matched_b_tilde,
)

WITH = SamplingMode.WITH_REPLACEMENT
WITHOUT = SamplingMode.WITHOUT_REPLACEMENT


class TestDrawSample:
    def test_full_without_replacement_is_permutation(self):
        gen = RngKey(1).generator()
        s = draw_sample(5, 5, WITHOUT, gen)
        assert sorted(s.indices) == [0, 1, 2, 3, 4]

    def test_single_point_pool(self):
        gen = RngKey(2).generator()
        s = draw_sample(1, 3, WITH, gen)
        np.testing.assert_array_equal(s.indices, [0, 0, 0])

    def test_replay_determinism(self):
        a = draw_sample(4, 2, WITH, RngKey(7).generator())
        b = draw_sample(4, 2, WITH, RngKey(7).generator())
        np.testing.assert_array_equal(a.indices, b.indices)

    def test_without_replacement_never_duplicates(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 30))
            m = int(rng.integers(1, n + 1))
            s = draw_sample(n, m, WITHOUT, rng)
            assert len(np.unique(s.indices)) == m

    def test_m_greater_than_n_rejected(self):
        with pytest.raises(ConfigInvalid):
            draw_sample(3, 4, WITHOUT, RngKey(0).generator())

    def test_uniformity_without_replacement(self, rng):
        # Each index should appear in a size-2 draw from 4 with prob 1/2.
        hits = np.zeros(4)
        reps = 4000
        for _ in range(reps):
            hits[draw_sample(4, 2, WITHOUT, rng).indices] += 1
        freq = hits / reps
        se = np.sqrt(0.5 * 0.5 / reps)
        assert np.all(np.abs(freq - 0.5) < 4 * se)

    def test_distinct_count_with_replacement(self, rng):
        # m = n with replacement keeps n(1 - (1 - 1/n)^n) distinct on average.
        n = 12
        reps = 3000
        distinct = [len(np.unique(draw_sample(n, n, WITH, rng).indices)) for _ in range(reps)]
        expected = n * (1 - (1 - 1 / n) ** n)
        se = np.std(distinct, ddof=1) / np.sqrt(reps)
        assert abs(np.mean(distinct) - expected) < 3 * se

    def test_exclusion_frequency_matches_formula(self, rng):
        # Excluding a fixed index from an n-point pool happens with
        # probability (1 - 1/n)^m; here n = m = 10.
        reps = 10_000
        excluded = sum(
            1 for _ in range(reps) if not draw_sample(10, 10, WITH, rng).contains(3)
        )
        p = (1 - 1 / 10) ** 10
        se = np.sqrt(p * (1 - p) / reps)
        assert abs(excluded / reps - p) < 3 * se


class TestIndexSample:
    def test_out_of_range_rejected(self):
        with pytest.raises(ConfigInvalid):
            IndexSample([0, 5], WITH, 5)

    def test_duplicate_without_replacement_rejected(self):
        with pytest.raises(ConfigInvalid):
            IndexSample([1, 1], WITHOUT, 5)


class TestKeepProbability:
    def test_with_replacement_formula(self):
        assert keep_probability(4, 2, WITH) == pytest.approx(0.64, abs=1e-12)

    def test_without_replacement_formula(self):
        assert keep_probability(4, 2, WITHOUT) == pytest.approx(0.6, abs=1e-12)

    def test_bootstrap_full_resample(self):
        # (40/41)^40, evaluated independently through log space: 0.372431.
        want = np.exp(40 * np.log(40 / 41))
        assert keep_probability(40, 40, WITH) == pytest.approx(want, rel=1e-12)
        assert keep_probability(40, 40, WITH) == pytest.approx(0.372431, abs=5e-7)

    def test_pool_size_convention(self):
        # keep_probability works on the lifted pool n + 1; the n-point pool
        # variant is exposed separately for the stability bound.
        assert keep_probability(9, 5, WITH) == exclusion_probability(10, 5, WITH)
        assert exclusion_probability(10, 5, WITH) == pytest.approx((0.9) ** 5, rel=1e-12)


class TestDrawB:
    def test_degenerate_theta_one(self):
        assert draw_B(10, 1.0, RngKey(0).generator()) == 10

    def test_theta_zero_rejected(self):
        with pytest.raises(ConfigInvalid):
            draw_B(10, 0.0, RngKey(0).generator())
        with pytest.raises(ConfigInvalid):
            draw_B(0, 0.5, RngKey(0).generator())

    def test_bernoulli_path_moments(self, rng):
        b_tilde, theta, reps = 200, 0.3, 4000
        draws = np.array([draw_B(b_tilde, theta, rng) for _ in range(reps)])
        mean, var = b_tilde * theta, b_tilde * theta * (1 - theta)
        se_mean = np.sqrt(var / reps)
        assert abs(draws.mean() - mean) < 3 * se_mean
        se_var = np.sqrt(2 / (reps - 1)) * var  # normal-approx spread of s^2
        assert abs(draws.var(ddof=1) - var) < 4 * se_var

    def test_inverse_cdf_path_moments(self, rng):
        # b_tilde above the Bernoulli cutoff exercises the inverse-CDF branch.
        b_tilde, theta, reps = 100_000, 0.64, 2000
        draws = np.array([draw_B(b_tilde, theta, rng) for _ in range(reps)])
        mean = b_tilde * theta
        se_mean = np.sqrt(b_tilde * theta * (1 - theta) / reps)
        assert abs(draws.mean() - mean) < 3 * se_mean


class TestMatchedBTilde:
    def test_per_loo_model_example(self):
        # 20 / ((40/41)^40 (39/40)^40): the (39/40)^40 factor is ~0.36323.
        assert matched_b_tilde(20, 40, 40, MatchVariant.PER_LOO_MODEL) == 147

    def test_fixed_total_example(self):
        want = int(np.floor(50 / np.exp(200 * np.log(200 / 201))))
        assert matched_b_tilde(50, 200, 200, MatchVariant.FIXED_TOTAL) == want == 135

    def test_m_zero_rejected(self):
        with pytest.raises(ConfigInvalid):
            matched_b_tilde(20, 40, 0, MatchVariant.PER_LOO_MODEL)

    def test_matches_direct_formula(self, rng):
        for _ in range(50):
            target = int(rng.integers(1, 100))
            n = int(rng.integers(2, 300))
            m = int(rng.integers(1, n + 1))
            keep_lifted = (1 - 1 / (n + 1)) ** m
            keep_train = (1 - 1 / n) ** m
            assert matched_b_tilde(target, n, m, MatchVariant.PER_LOO_MODEL) == int(
                np.floor(target / (keep_lifted * keep_train) + 1e-9)
            )
            assert matched_b_tilde(target, n, m, MatchVariant.FIXED_TOTAL) == int(
                np.floor(target / keep_lifted + 1e-9)
            )
