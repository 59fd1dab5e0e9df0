"""Symmetric base regression algorithms: ridge, k-NN, tree, and a small forest.

Every learner here is invariant to the order of its training rows, which the
ensemble theory requires. The deterministic kinds (ridge, k-NN, tree) get
this for free from canonical row ordering; the forest additionally derives
all of its feature-subsampling randomness from a hash of the sorted row
multiset combined with the caller's key, so even the randomized kind is
order-invariant as a deterministic fact rather than only in distribution.

Duplicate rows (from with-replacement resampling) are kept with multiplicity.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import RngKey
from .errors import ConfigInvalid, EmptyInput, NumericalFailure



@dataclass(frozen=True)
class RidgeSpec:
    """Ridge regression with an unpenalized intercept.

    The penalty is ``lambda_factor`` times the squared spectral norm of the
    training feature matrix, so its strength tracks the scale of the data.
    """

    lambda_factor: float = 0.001

    def __post_init__(self) -> None:
        if self.lambda_factor <= 0:
            raise ConfigInvalid(f"lambda_factor must be > 0, got {self.lambda_factor}")


@dataclass(frozen=True)
class KnnSpec:
    """k-nearest-neighbors with Euclidean distance and mean-of-neighbors output.

    When fewer than k rows are available, all rows are used (so large k turns
    this into a constant mean-of-responses learner).
    """

    k: int = 5

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigInvalid(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class TreeSpec:
    """Regression tree splitting on absolute-deviation reduction, median leaves."""

    max_depth: int = 6
    min_leaf: int = 3

    def __post_init__(self) -> None:
        if self.max_depth < 1 or self.min_leaf < 1:
            raise ConfigInvalid("max_depth and min_leaf must be >= 1")


@dataclass(frozen=True)
class ForestSpec:
    """Mean of ``n_trees`` trees, each subsampling features at every split.

    ``feature_subsample`` is the number of candidate features per split;
    ``None`` means round(sqrt(p)) resolved at fit time.
    """

    n_trees: int = 20
    max_depth: int = 6
    min_leaf: int = 3
    feature_subsample: int | None = None

    def __post_init__(self) -> None:
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ConfigInvalid("n_trees, max_depth and min_leaf must be >= 1")
        if self.feature_subsample is not None and self.feature_subsample < 1:
            raise ConfigInvalid("feature_subsample must be >= 1 when given")


RegressorSpec = RidgeSpec | KnnSpec | TreeSpec | ForestSpec

_SPEC_NAMES = {RidgeSpec: "ridge", KnnSpec: "knn", TreeSpec: "tree", ForestSpec: "forest"}


@dataclass(frozen=True)
class FittedModel:
    """A fitted base model: a total, deterministic prediction function.

    ``predict`` accepts a single feature vector of length p or a (k, p)
    matrix, returning a float or a length-k vector respectively.
    """

    predict: Callable[[np.ndarray], np.ndarray | float]
    kind: str
    n_train: int


def _canonical_order(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Lexicographic by feature columns, response last as tie-breaker.
    keys = (y,) + tuple(x[:, j] for j in range(x.shape[1] - 1, -1, -1))
    return np.lexsort(keys)


def _row_multiset_hash(x: np.ndarray, y: np.ndarray) -> int:
    rows = np.ascontiguousarray(np.column_stack([x, y]), dtype=np.float64)
    return int.from_bytes(hashlib.blake2b(rows.tobytes(), digest_size=16).digest(), "big")


def spectral_norm_sq(features: np.ndarray) -> float:
    """Squared spectral norm (largest eigenvalue of the Gram matrix).

    Computed by LAPACK SVD: bootstrap resamples routinely produce Gram
    matrices whose top two eigenvalues agree to three decimals, where an
    iterative scheme stalls, so the dense factorization is both the fast
    and the robust choice at these sizes.
    """
    x = np.asarray(features, dtype=np.float64)
    try:
        top = float(np.linalg.svd(x, compute_uv=False)[0])
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("SVD of the feature matrix did not converge") from exc
    return top * top


def ridge_penalty(features: np.ndarray, lambda_factor: float) -> float:
    """Penalty lambda_factor * (spectral norm of the feature matrix)^2."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyInput("ridge penalty requires a non-empty feature matrix")
    if lambda_factor <= 0:
        raise ConfigInvalid(f"lambda_factor must be > 0, got {lambda_factor}")
    return lambda_factor * spectral_norm_sq(x)


class _RidgeModel:
    def __init__(self, x: np.ndarray, y: np.ndarray, lambda_factor: float):
        # Canonical row order makes every floating-point reduction below
        # independent of the order the rows arrived in, so symmetry holds
        # exactly rather than up to rounding.
        order = _canonical_order(x, y)
        x, y = x[order], y[order]
        lam = ridge_penalty(x, lambda_factor)
        self._x_mean = x.mean(axis=0)
        self._y_mean = float(y.mean())
        xc = x - self._x_mean
        yc = y - self._y_mean
        gram = xc.T @ xc + lam * np.eye(x.shape[1])
        rhs = xc.T @ yc
        try:
            self._beta = _chol_solve(gram, rhs)
        except np.linalg.LinAlgError:
            # lam > 0 makes the system positive definite up to rounding;
            # a whisper of jitter absorbs the rounding.
            try:
                self._beta = _chol_solve(gram + 1e-10 * np.eye(x.shape[1]), rhs)
            except np.linalg.LinAlgError as exc:
                raise NumericalFailure("ridge normal equations are singular") from exc

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xx = np.atleast_2d(x) - self._x_mean
        # Accumulate column by column: each row's sum has a fixed order, so a
        # point predicts the same value whether evaluated alone or in a batch.
        out = np.full(xx.shape[0], self._y_mean)
        for j in range(xx.shape[1]):
            out += xx[:, j] * self._beta[j]
        return float(out[0]) if single else out


def _chol_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    c = np.linalg.cholesky(a)
    return np.linalg.solve(c.T, np.linalg.solve(c, b))


class _KnnModel:
    def __init__(self, x: np.ndarray, y: np.ndarray, k: int):
        order = _canonical_order(x, y)
        self._x = x[order]
        self._y = y[order]
        self._k = min(k, x.shape[0])

    def _predict_one(self, q: np.ndarray) -> float:
        d = np.linalg.norm(self._x - q, axis=1)
        # Stable sort on canonically ordered rows: distance ties resolve to
        # the lower canonical rank.
        nearest = np.argsort(d, kind="stable")[: self._k]
        return float(self._y[nearest].mean())

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return self._predict_one(x)
        return np.array([self._predict_one(row) for row in x])


@dataclass(frozen=True)
class _Leaf:
    value: float


@dataclass(frozen=True)
class _Split:
    feature: int
    threshold: float
    left: object
    right: object


def _abs_dev_cost(y: np.ndarray) -> float:
    # Total absolute deviation around the median: the quantity a median leaf
    # minimizes.
    return float(np.abs(y - np.median(y)).sum())


def _best_split(x, y, candidate_features, min_leaf):
    best = None  # (gain, feature, threshold)
    parent_cost = _abs_dev_cost(y)
    for f in candidate_features:
        col = x[:, f]
        values = np.unique(col)
        if values.size < 2:
            continue
        thresholds = (values[:-1] + values[1:]) / 2.0
        for thr in thresholds:
            mask = col <= thr
            n_left = int(mask.sum())
            if n_left < min_leaf or (y.size - n_left) < min_leaf:
                continue
            gain = parent_cost - _abs_dev_cost(y[mask]) - _abs_dev_cost(y[~mask])
            # Strict > with features and thresholds ascending: ties keep the
            # lowest feature index, then the lowest threshold.
            if best is None or gain > best[0]:
                best = (gain, f, thr)
    if best is None or best[0] <= 0.0:
        return None
    return best


def _grow_tree(x, y, depth, max_depth, min_leaf, feature_picker):
    if depth >= max_depth or y.size < 2 * min_leaf:
        return _Leaf(float(np.median(y)))
    split = _best_split(x, y, feature_picker(x.shape[1]), min_leaf)
    if split is None:
        return _Leaf(float(np.median(y)))
    _, f, thr = split
    mask = x[:, f] <= thr
    left = _grow_tree(x[mask], y[mask], depth + 1, max_depth, min_leaf, feature_picker)
    right = _grow_tree(x[~mask], y[~mask], depth + 1, max_depth, min_leaf, feature_picker)
    return _Split(f, float(thr), left, right)


def _tree_predict_one(node, q: np.ndarray) -> float:
    while isinstance(node, _Split):
        node = node.left if q[node.feature] <= node.threshold else node.right
    return node.value


class _TreeModel:
    def __init__(self, x, y, max_depth, min_leaf, feature_picker=None):
        order = _canonical_order(x, y)
        picker = feature_picker if feature_picker is not None else lambda p: range(p)
        self._root = _grow_tree(x[order], y[order], 0, max_depth, min_leaf, picker)

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return _tree_predict_one(self._root, x)
        return np.array([_tree_predict_one(self._root, row) for row in x])


class _ForestModel:
    def __init__(self, x, y, spec: ForestSpec, fit_key: RngKey):
        order = _canonical_order(x, y)
        xs, ys = x[order], y[order]
        p = x.shape[1]
        mtry = spec.feature_subsample or max(1, round(np.sqrt(p)))
        mtry = min(mtry, p)
        # All tree randomness descends from the sorted row multiset plus the
        # caller's key, so refitting a permutation of the same rows (with the
        # same key) rebuilds the identical forest.
        entropy = _row_multiset_hash(xs, ys)
        base = np.random.SeedSequence(entropy=entropy, spawn_key=(fit_key.seed, *fit_key.path))
        self._trees = []
        for t, child in enumerate(base.spawn(spec.n_trees)):
            rng = np.random.Generator(np.random.PCG64(child))

            def picker(n_features, _rng=rng, _mtry=mtry):
                return np.sort(_rng.choice(n_features, size=min(_mtry, n_features), replace=False))

            self._trees.append(
                _TreeModel(xs, ys, spec.max_depth, spec.min_leaf, feature_picker=picker)
            )

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return float(np.mean([t.predict(x) for t in self._trees]))
        return np.mean([t.predict(x) for t in self._trees], axis=0)


def fit(
    spec: RegressorSpec,
    features: np.ndarray,
    responses: np.ndarray,
    fit_key: RngKey | None = None,
) -> FittedModel:
    """Fit one base model on a row multiset.

    Parameters
    ----------
    spec : RegressorSpec
        Which algorithm to fit and its hyperparameters.
    features, responses : ndarray
        Training rows; duplicates are legitimate and kept with multiplicity.
    fit_key : RngKey, optional
        Source of fitting randomness. Only the forest consumes it, and only
        through the order-invariant canonicalization described above.

    Returns
    -------
    FittedModel
        Order-invariant deterministic predictor for this row multiset.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(responses, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyInput("cannot fit on an empty training set")
    if x.shape[0] != y.shape[0]:
        raise EmptyInput(f"feature rows ({x.shape[0]}) != responses ({y.shape[0]})")
    if isinstance(spec, RidgeSpec):
        model = _RidgeModel(x, y, spec.lambda_factor)
    elif isinstance(spec, KnnSpec):
        model = _KnnModel(x, y, spec.k)
    elif isinstance(spec, TreeSpec):
        model = _TreeModel(x, y, spec.max_depth, spec.min_leaf)
    elif isinstance(spec, ForestSpec):
        model = _ForestModel(x, y, spec, fit_key or RngKey(0))
    else:
        raise ConfigInvalid(f"unknown regressor spec: {spec!r}")
    return FittedModel(predict=model.predict, kind=_SPEC_NAMES[type(spec)], n_train=x.shape[0])
