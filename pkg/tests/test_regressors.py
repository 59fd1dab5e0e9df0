import numpy as np
import pytest

from jabkit import (
    EmptyInput,
    ForestSpec,
    KnnSpec,
    RidgeSpec,
    RngKey,
    TreeSpec,
    fit,
    ridge_penalty,
    spectral_norm_sq,
)

ALL_SPECS = [
    RidgeSpec(),
    KnnSpec(k=3),
    TreeSpec(max_depth=4, min_leaf=1),
    ForestSpec(n_trees=5, max_depth=3, min_leaf=1, feature_subsample=1),
]


class TestRidge:
    def test_closed_form_two_points(self):
        # X = [[1], [-1]], y = (1, -1): centered Gram = 2, penalty = 0.002,
        # slope = 2 / 2.002 from the normal equations by hand.
        model = fit(RidgeSpec(0.001), np.array([[1.0], [-1.0]]), np.array([1.0, -1.0]))
        assert model.predict(np.array([1.0])) == pytest.approx(2 / 2.002, rel=1e-12)

    def test_zero_responses_predict_zero(self, rng):
        x = rng.standard_normal((10, 3))
        model = fit(RidgeSpec(), x, np.zeros(10))
        assert model.predict(x[0]) == pytest.approx(0.0, abs=1e-12)

    def test_matches_augmented_least_squares(self, rng):
        # Independent oracle: solve the centered penalized system with lstsq
        # on the stacked [Xc; sqrt(lam) I] design.
        x = rng.standard_normal((20, 4))
        y = rng.standard_normal(20)
        lam = ridge_penalty(x, 0.001)
        xc = x - x.mean(axis=0)
        yc = y - y.mean()
        design = np.vstack([xc, np.sqrt(lam) * np.eye(4)])
        target = np.concatenate([yc, np.zeros(4)])
        beta, *_ = np.linalg.lstsq(design, target, rcond=None)
        model = fit(RidgeSpec(0.001), x, y)
        q = rng.standard_normal(4)
        want = (q - x.mean(axis=0)) @ beta + y.mean()
        assert model.predict(q) == pytest.approx(want, rel=1e-9)

    def test_shrinkage_limit_is_intercept(self, rng):
        x = rng.standard_normal((15, 2))
        y = rng.standard_normal(15) + 3.0
        model = fit(RidgeSpec(lambda_factor=1e12), x, y)
        assert model.predict(rng.standard_normal(2)) == pytest.approx(y.mean(), rel=1e-6)

    def test_translation_equivariance(self, rng):
        x = rng.standard_normal((12, 3))
        y = rng.standard_normal(12)
        q = rng.standard_normal(3)
        base = fit(RidgeSpec(), x, y).predict(q)
        shifted = fit(RidgeSpec(), x, y + 5.0).predict(q)
        assert shifted == pytest.approx(base + 5.0, rel=1e-12)


class TestRidgePenalty:
    def test_two_by_one(self):
        assert ridge_penalty(np.array([[1.0], [-1.0]]), 0.001) == pytest.approx(0.002, rel=1e-9)

    def test_identity(self):
        assert ridge_penalty(np.eye(3), 0.001) == pytest.approx(0.001, rel=1e-9)

    def test_diagonal(self):
        got = ridge_penalty(np.array([[3.0, 0.0], [0.0, 4.0]]), 0.001)
        assert got == pytest.approx(0.016, rel=1e-9)

    def test_against_matrix_norm(self, rng):
        for _ in range(25):
            x = rng.standard_normal((int(rng.integers(2, 30)), int(rng.integers(1, 8))))
            want = np.linalg.norm(x, ord=2) ** 2
            assert spectral_norm_sq(x) == pytest.approx(want, rel=1e-10)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            ridge_penalty(np.zeros((0, 2)), 0.001)


class TestKnn:
    def test_nearest_neighbor(self):
        model = fit(KnnSpec(k=1), np.array([[0.0], [10.0]]), np.array([5.0, 7.0]))
        assert model.predict(np.array([1.0])) == 5.0

    def test_k_clamped_to_all_rows(self):
        # Oversized k turns k-NN into the constant mean-of-responses learner.
        model = fit(KnnSpec(k=99), np.array([[0.0], [1.0], [2.0]]), np.array([0.0, 3.0, 6.0]))
        assert model.predict(np.array([100.0])) == 3.0

    def test_mean_of_k_neighbors(self):
        x = np.array([[0.0], [1.0], [10.0]])
        model = fit(KnnSpec(k=2), x, np.array([2.0, 4.0, 100.0]))
        assert model.predict(np.array([0.4])) == 3.0


class TestTree:
    def test_recovers_step_function(self):
        x = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]])
        y = np.array([1.0, 1.0, 1.0, 9.0, 9.0, 9.0])
        model = fit(TreeSpec(max_depth=2, min_leaf=1), x, y)
        assert model.predict(np.array([-1.0])) == 1.0
        assert model.predict(np.array([50.0])) == 9.0

    def test_leaf_is_median(self):
        x = np.zeros((3, 1))  # no split possible
        model = fit(TreeSpec(max_depth=3, min_leaf=1), x, np.array([1.0, 2.0, 100.0]))
        assert model.predict(np.array([0.0])) == 2.0

    def test_min_leaf_respected(self):
        x = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0.0, 0.0, 10.0, 10.0])
        model = fit(TreeSpec(max_depth=5, min_leaf=2), x, y)
        # Split at 1.5 is allowed (2 per side); deeper splits are not.
        assert model.predict(np.array([0.0])) == 0.0
        assert model.predict(np.array([3.0])) == 10.0


class TestSymmetryAndBounds:
    @pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: type(s).__name__)
    def test_order_invariance_exact(self, spec, rng):
        for trial in range(100):
            n = int(rng.integers(3, 12))
            p = int(rng.integers(1, 4))
            x = rng.standard_normal((n, p))
            y = rng.standard_normal(n)
            perm = rng.permutation(n)
            key = RngKey(trial)
            a = fit(spec, x, y, fit_key=key)
            b = fit(spec, x[perm], y[perm], fit_key=key)
            queries = rng.standard_normal((10, p))
            np.testing.assert_array_equal(a.predict(queries), b.predict(queries))

    @pytest.mark.parametrize("spec", ALL_SPECS[1:], ids=lambda s: type(s).__name__)
    def test_predictions_bounded_by_responses(self, spec, rng):
        # The non-linear learners interpolate order statistics of the
        # responses, so their output range is pinned to the training range.
        for trial in range(30):
            n = int(rng.integers(2, 15))
            x = rng.standard_normal((n, 2))
            y = rng.standard_normal(n) * 10
            model = fit(spec, x, y, fit_key=RngKey(trial))
            preds = model.predict(rng.standard_normal((20, 2)) * 3)
            assert np.all(preds >= y.min() - 1e-12)
            assert np.all(preds <= y.max() + 1e-12)

    def test_duplicate_rows_kept_with_multiplicity(self):
        # Mean of a multiset weights duplicates; k-NN with k=3 must see the
        # duplicated row twice.
        x = np.array([[0.0], [0.0], [5.0]])
        y = np.array([1.0, 1.0, 10.0])
        model = fit(KnnSpec(k=3), x, y)
        assert model.predict(np.array([0.0])) == 4.0

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            fit(RidgeSpec(), np.zeros((0, 2)), np.zeros(0))

    def test_forest_deterministic_given_key(self, rng):
        x = rng.standard_normal((10, 3))
        y = rng.standard_normal(10)
        spec = ForestSpec(n_trees=4, max_depth=3, min_leaf=1, feature_subsample=2)
        q = rng.standard_normal((5, 3))
        a = fit(spec, x, y, fit_key=RngKey(5)).predict(q)
        b = fit(spec, x, y, fit_key=RngKey(5)).predict(q)
        np.testing.assert_array_equal(a, b)
        c = fit(spec, x, y, fit_key=RngKey(6)).predict(q)
        assert not np.array_equal(a, c)  # different key, different subsampling

    def test_single_point_prediction_matches_batch(self, rng):
        # Batch evaluation must agree bit-for-bit with one-at-a-time calls;
        # the coupling verifier relies on this.
        for spec in ALL_SPECS:
            x = rng.standard_normal((8, 3))
            y = rng.standard_normal(8)
            model = fit(spec, x, y, fit_key=RngKey(1))
            queries = rng.standard_normal((6, 3))
            batch = model.predict(queries)
            singles = np.array([model.predict(q) for q in queries])
            np.testing.assert_array_equal(batch, singles)
