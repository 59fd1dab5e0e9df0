"""Executable counterparts of the coverage argument, used as test oracles.

The coverage guarantee for the out-of-bag jackknife+ rests on three pieces
that are all directly computable: a lifted run over the n + 1 augmented
points producing an exchangeable array of leave-two-out residuals, a
tournament matrix whose high-row-sum index set is deterministically small,
and a coupling that filters the lifted resamples down to an ordinary run
with a Binomial member count. This module computes each piece so the test
suite (and the ``verify`` CLI subcommand) can check them on real runs
rather than trusting the algebra.

Building the full residual array costs on the order of n^2 aggregations, so
:func:`lifted_residuals` refuses pools beyond a cap unless overridden.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .aggregation import AggregationSpec, aggregate
from .core import Dataset, FixedB, MethodConfig, RngKey, SamplingMode
from .errors import ConfigInvalid, EmptyInput
from .intervals import fit_jab
from .quantiles import ceil_snap
from .regressors import RegressorSpec, fit
from .resampling import IndexSample, draw_sample

logger = logging.getLogger(__name__)

_STREAM_SAMPLES = 1
_STREAM_FIT = 2

DEFAULT_POOL_CAP = 64


@dataclass
class LiftedRun:
    """Everything a lifted ensemble run produced.

    ``aggregates[i, j]`` is the leave-(i, j)-out aggregate evaluated at the
    i-th point (NaN on the diagonal); ``residuals[i, j]`` its absolute error
    against the i-th response, zero on the diagonal.
    """

    samples: list[IndexSample]
    fit_keys: list[RngKey]
    member_predictions: np.ndarray
    aggregates: np.ndarray
    residuals: np.ndarray
    m: int
    mode: SamplingMode
    regressor_spec: RegressorSpec
    aggregation_spec: AggregationSpec

    @property
    def pool(self) -> int:
        return self.residuals.shape[0]

    @property
    def b_tilde(self) -> int:
        return len(self.samples)


def lifted_residuals(
    augmented_data: Dataset,
    b_tilde: int,
    m: int,
    mode: SamplingMode,
    regressor_spec: RegressorSpec,
    aggregation_spec: AggregationSpec,
    rng_key: RngKey,
    *,
    samples: list[IndexSample] | None = None,
    pool_cap: int = DEFAULT_POOL_CAP,
) -> LiftedRun:
    """Run the lifted ensemble over all n + 1 points and build the residual array.

    Draws ``b_tilde`` resamples from the full augmented pool, fits one member
    per resample, and for every ordered pair (i, j) aggregates the members
    whose resample missed both i and j, evaluated at the i-th point. Pairs
    excluded by no resample fall back to the empty-aggregation default.
    Tests may inject pre-drawn ``samples``, which then fix b_tilde.
    """
    pool = augmented_data.n
    if pool < 3:
        raise EmptyInput(f"the lifted pool needs at least 3 points, got {pool}")
    if pool > pool_cap:
        raise ConfigInvalid(
            f"lifted pool {pool} exceeds the cap {pool_cap}; pass pool_cap explicitly "
            "if the quadratic cost is intended"
        )
    if samples is None:
        if b_tilde < 1:
            raise ConfigInvalid(f"b_tilde must be >= 1, got {b_tilde}")
        sample_rng = rng_key.child(_STREAM_SAMPLES).generator()
        samples = [draw_sample(pool, m, mode, sample_rng) for _ in range(b_tilde)]
    else:
        samples = list(samples)
        b_tilde = len(samples)
    fit_keys = [rng_key.child(_STREAM_FIT, b) for b in range(b_tilde)]
    models = [
        fit(regressor_spec, augmented_data.features[s.indices],
            augmented_data.responses[s.indices], fit_key=k)
        for s, k in zip(samples, fit_keys)
    ]
    member_preds = np.array(
        [mdl.predict(augmented_data.features) for mdl in models], dtype=np.float64
    )

    membership = np.zeros((b_tilde, pool), dtype=bool)
    for b, s in enumerate(samples):
        membership[b, s.indices] = True

    aggregates = np.full((pool, pool), np.nan)
    residuals = np.zeros((pool, pool))
    for i in range(pool):
        for j in range(pool):
            if i == j:
                continue
            members = np.flatnonzero(~membership[:, i] & ~membership[:, j])
            value = aggregate(aggregation_spec, member_preds[members, i])
            aggregates[i, j] = value
            residuals[i, j] = abs(augmented_data.responses[i] - value)
    return LiftedRun(
        samples=samples,
        fit_keys=fit_keys,
        member_predictions=member_preds,
        aggregates=aggregates,
        residuals=residuals,
        m=m,
        mode=mode,
        regressor_spec=regressor_spec,
        aggregation_spec=aggregation_spec,
    )


def tournament(residual_matrix: np.ndarray) -> np.ndarray:
    """Binary matrix a[i, j] = 1 when residuals[i, j] > residuals[j, i]."""
    r = np.asarray(residual_matrix, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ConfigInvalid("residual matrix must be square")
    a = (r > r.T).astype(np.int8)
    np.fill_diagonal(a, 0)
    return a


def s_alpha(a: np.ndarray, alpha: float) -> np.ndarray:
    """Indices whose tournament row sum reaches (1 - alpha) * (pool size).

    However the matrix was produced, the strict-comparison structure
    (a[i, j] + a[j, i] <= 1) forces this set to hold at most
    2 * alpha * (pool size) indices.
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigInvalid("tournament matrix must be square")
    pool = a.shape[0]
    threshold = ceil_snap((1.0 - alpha) * pool)
    return np.flatnonzero(a.sum(axis=1) >= threshold)


def couple(
    lifted_samples: list[IndexSample],
    test_index: int,
    fit_keys: list[RngKey] | None = None,
) -> tuple[int, list[IndexSample], list[RngKey] | None]:
    """Filter lifted resamples down to those excluding the held-out point.

    Keeps, in their original order, exactly the resamples that miss
    ``test_index`` (which must be the last pool index). Their indices already
    lie in [0, test_index), so they re-tag as draws from the training pool
    unchanged. The count of kept resamples is the Binomial member count the
    coverage theorem asks for. Fit keys, when given, are filtered in step.
    """
    if not lifted_samples:
        return 0, [], [] if fit_keys is not None else None
    pool = lifted_samples[0].n_pool
    if test_index != pool - 1:
        raise ConfigInvalid(
            f"test_index must be the last pool index ({pool - 1}), got {test_index}"
        )
    kept_samples = []
    kept_keys = [] if fit_keys is not None else None
    for b, s in enumerate(lifted_samples):
        if s.contains(test_index):
            continue
        kept_samples.append(IndexSample(s.indices, s.mode, test_index))
        if fit_keys is not None:
            kept_keys.append(fit_keys[b])
    return len(kept_samples), kept_samples, kept_keys


def coupling_check(augmented_data: Dataset, run: LiftedRun, alpha: float) -> bool:
    """Verify the lifted run and the ordinary run are the same object in disguise.

    Runs the ordinary out-of-bag algorithm on the first n points with the
    coupled resamples (members genuinely refit), then requires exact
    equality between its leave-one-out aggregates -- at each training point
    and at the held-out point -- and the lifted leave-two-out aggregates
    pairing that point with the held-out index, and finally that the
    miscoverage counting events computed on either side agree. Returns False
    (with logged diagnostics) on any mismatch.
    """
    pool = run.pool
    test_index = pool - 1
    n = test_index
    train = Dataset(augmented_data.features[:n], augmented_data.responses[:n])
    b, samples, fit_keys = couple(run.samples, test_index, run.fit_keys)

    config = MethodConfig(
        alpha=alpha,
        m=run.m,
        sampling_mode=run.mode,
        b_mode=FixedB(b),
        regressor_spec=run.regressor_spec,
        aggregation_spec=run.aggregation_spec,
        seed=0,
    )
    ensemble, residuals = fit_jab(train, config, samples=samples, fit_keys=fit_keys)
    loo_at_test = ensemble.loo_values_at(augmented_data.features[test_index])

    ok = True
    for i in range(n):
        at_own = ensemble.loo_train_predictions[i]
        if at_own != run.aggregates[i, test_index]:
            logger.warning(
                "coupling mismatch at training point %d: ordinary loo aggregate %r != "
                "lifted leave-two-out aggregate %r",
                i, at_own, run.aggregates[i, test_index],
            )
            ok = False
        if loo_at_test[i] != run.aggregates[test_index, i]:
            logger.warning(
                "coupling mismatch at held-out point for i=%d: %r != %r",
                i, loo_at_test[i], run.aggregates[test_index, i],
            )
            ok = False

    threshold = ceil_snap((1.0 - alpha) * pool)
    lifted_count = int(
        sum(
            run.residuals[test_index, j] > run.residuals[j, test_index]
            for j in range(pool)
            if j != test_index
        )
    )
    y_test = augmented_data.responses[test_index]
    ordinary_count = int(np.sum(np.abs(y_test - loo_at_test) > residuals.values))
    lifted_event = lifted_count >= threshold
    ordinary_event = ordinary_count >= threshold
    if lifted_event != ordinary_event:
        logger.warning(
            "coupling event mismatch: lifted count %d, ordinary count %d, threshold %d",
            lifted_count, ordinary_count, threshold,
        )
        ok = False
    return ok
