"""Predictive interval estimators built on leave-one-out residuals.

The headline construction fits one bootstrap ensemble and recycles it: the
leave-one-out model for training point i is the aggregation of exactly those
members whose resample missed i, so the whole family of n leave-one-out
models costs no base-learner fits beyond the ensemble itself. Classical
jackknife and jackknife+ baselines, the conservative min-max variant, the
inflated intervals used by stability analyses, and a conformity-score
generalization share the same quantile machinery.

Every estimator is split into a ``fit_*`` stage returning an immutable
fitted state plus exact call counters, and ``predict_*`` functions that are
pure given that state (they only advance the counters).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .aggregation import AggregationSpec, Mean, aggregate
from .core import (
    CallCounters,
    Dataset,
    FixedB,
    MethodConfig,
    PredictionInterval,
    RandomB,
    RngKey,
)
from .errors import ConfigInvalid, EmptyInput, UnsupportedScore
from .quantiles import ceil_snap, q_minus, q_plus
from .regressors import FittedModel, RegressorSpec, fit
from .resampling import IndexSample, draw_B, draw_sample, keep_probability

logger = logging.getLogger(__name__)

# Stream ids hung off a method's seed; fixed so runs are replayable.
_STREAM_B = 0
_STREAM_SAMPLES = 1
_STREAM_FIT = 2


@dataclass
class JabEnsemble:
    """A fitted out-of-bag ensemble: members, resamples, and leave-one-out bookkeeping.

    ``oob_members[i]`` lists the member indices whose resample excluded
    training point i; the leave-one-out model for i is the aggregation of
    exactly those members. ``loo_train_predictions[i]`` caches that model's
    value at the i-th training point, the only training-side evaluation the
    residuals need.
    """

    models: list[FittedModel]
    samples: list[IndexSample]
    oob_members: list[np.ndarray]
    loo_train_predictions: np.ndarray
    data: Dataset
    aggregation: AggregationSpec
    alpha: float
    counters: CallCounters = field(default_factory=CallCounters)

    @property
    def b(self) -> int:
        return len(self.models)

    @property
    def n(self) -> int:
        return self.data.n

    def member_predictions(self, x: np.ndarray) -> np.ndarray:
        """Evaluate every member at one point, counting B evaluations."""
        q = np.asarray(x, dtype=np.float64)
        self.counters.evals += len(self.models)
        return np.array([m.predict(q) for m in self.models], dtype=np.float64)

    def member_predictions_batch(self, xs: np.ndarray) -> np.ndarray:
        """(B, n_points) member evaluations; every model is batch-invariant
        per row, so this equals stacking the per-point calls."""
        xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
        self.counters.evals += len(self.models) * xs.shape[0]
        if not self.models:
            return np.zeros((0, xs.shape[0]))
        return np.array([m.predict(xs) for m in self.models], dtype=np.float64)

    def _loo_from_members(self, member_vals: np.ndarray) -> np.ndarray:
        self.counters.phi_calls += self.n
        return np.array(
            [aggregate(self.aggregation, member_vals[ids]) for ids in self.oob_members]
        )

    def loo_values_at(self, x: np.ndarray) -> np.ndarray:
        """All n leave-one-out aggregate predictions at one point (n phi calls)."""
        return self._loo_from_members(self.member_predictions(x))


@dataclass(frozen=True)
class LooResiduals:
    """Absolute leave-one-out residuals |Y_i - loo model at X_i|."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ConfigInvalid("residuals must be finite and nonnegative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def _oob_members(samples: Sequence[IndexSample], n: int) -> list[np.ndarray]:
    membership = np.zeros((len(samples), n), dtype=bool)
    for b, s in enumerate(samples):
        membership[b, s.indices] = True
    return [np.flatnonzero(~membership[:, i]) for i in range(n)]


def fit_jab(
    data: Dataset,
    config: MethodConfig,
    rng_key: RngKey | None = None,
    *,
    samples: Sequence[IndexSample] | None = None,
    fit_keys: Sequence[RngKey] | None = None,
) -> tuple[JabEnsemble, LooResiduals]:
    """Fit the out-of-bag ensemble stage shared by the J+aB and min-max intervals.

    The member count is taken from ``config.b_mode``: fixed, or one Binomial
    draw with the keep probability for this sampling mode. Exactly B base
    fits are made. ``samples``/``fit_keys`` let callers inject pre-drawn
    resamples (tests and the coupling verifier use this); injected samples
    fix B to their count.

    Returns
    -------
    (JabEnsemble, LooResiduals)
        The fitted ensemble with counters, and the n leave-one-out residuals.
    """
    if data.n < 1:
        raise EmptyInput("need at least 1 training point")
    key = rng_key if rng_key is not None else config.rng_key()
    if samples is None:
        if isinstance(config.b_mode, FixedB):
            b = config.b_mode.b
        else:
            theta = keep_probability(data.n, config.m, config.sampling_mode)
            b = draw_B(config.b_mode.b_tilde, theta, key.child(_STREAM_B).generator())
        sample_rng = key.child(_STREAM_SAMPLES).generator()
        samples = [
            draw_sample(data.n, config.m, config.sampling_mode, sample_rng) for _ in range(b)
        ]
    else:
        samples = list(samples)
        b = len(samples)
    if fit_keys is None:
        fit_keys = [key.child(_STREAM_FIT, j) for j in range(b)]
    elif len(fit_keys) != b:
        raise ConfigInvalid("fit_keys must match the number of samples")

    counters = CallCounters()
    models = []
    for s, fk in zip(samples, fit_keys):
        models.append(fit(config.regressor_spec, *_rows(data, s), fit_key=fk))
        counters.r_calls += 1

    # One pass of every member over every training point covers all the
    # out-of-bag evaluations the residuals need.
    if b > 0:
        train_preds = np.array([m.predict(data.features) for m in models], dtype=np.float64)
        counters.evals += b * data.n
    else:
        train_preds = np.zeros((0, data.n))

    oob = _oob_members(samples, data.n)
    empty_cells = sum(1 for ids in oob if ids.size == 0)
    if empty_cells and b > 0:
        logger.warning(
            "%d of %d training points appear in every resample; their leave-one-out "
            "models fall back to the empty-aggregation default (consider a larger ensemble)",
            empty_cells,
            data.n,
        )
    loo_train = np.empty(data.n)
    for i, ids in enumerate(oob):
        loo_train[i] = aggregate(config.aggregation_spec, train_preds[ids, i])
    counters.phi_calls += data.n

    residuals = LooResiduals(np.abs(data.responses - loo_train))
    ensemble = JabEnsemble(
        models=models,
        samples=samples,
        oob_members=oob,
        loo_train_predictions=loo_train,
        data=data,
        aggregation=config.aggregation_spec,
        alpha=config.alpha,
        counters=counters,
    )
    return ensemble, residuals


def _rows(data: Dataset, sample: IndexSample) -> tuple[np.ndarray, np.ndarray]:
    return data.features[sample.indices], data.responses[sample.indices]


def predict_jab(
    ensemble: JabEnsemble,
    residuals: LooResiduals,
    x: np.ndarray,
    alpha: float | None = None,
) -> PredictionInterval:
    """Out-of-bag jackknife+ interval at one test point.

    The endpoints are the lower/upper order-statistic quantiles of the n
    shifted values (loo prediction at x) -/+ (loo residual). Costs B model
    evaluations and n aggregations, which the ensemble counters record.
    """
    a = ensemble.alpha if alpha is None else alpha
    loo_at_x = ensemble.loo_values_at(np.asarray(x, dtype=np.float64))
    r = residuals.values
    return PredictionInterval.from_endpoints(
        q_minus(loo_at_x - r, a), q_plus(loo_at_x + r, a)
    )


def predict_jab_batch(ensemble, residuals, xs, alpha=None) -> list[PredictionInterval]:
    """J+aB intervals for each row of ``xs``.

    Evaluates each member once over the whole batch; the per-point cost
    accounting (B evaluations, n aggregations per point) is identical to
    calling :func:`predict_jab` row by row, and so are the intervals.
    """
    a = ensemble.alpha if alpha is None else alpha
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    member_vals = ensemble.member_predictions_batch(xs)
    r = residuals.values
    out = []
    for t in range(xs.shape[0]):
        loo = ensemble._loo_from_members(member_vals[:, t])
        out.append(
            PredictionInterval.from_endpoints(q_minus(loo - r, a), q_plus(loo + r, a))
        )
    return out


def predict_jmm_ab(
    ensemble: JabEnsemble,
    residuals: LooResiduals,
    x: np.ndarray,
    alpha: float | None = None,
) -> PredictionInterval:
    """Min-max variant: extreme leave-one-out predictions padded by the residual quantile.

    Always contains the corresponding J+aB interval, and is typically far
    wider; it exists as a conservative reference, not a recommendation.
    """
    a = ensemble.alpha if alpha is None else alpha
    loo_at_x = ensemble.loo_values_at(np.asarray(x, dtype=np.float64))
    pad = q_plus(residuals.values, a)
    return PredictionInterval.from_endpoints(
        float(loo_at_x.min()) - pad, float(loo_at_x.max()) + pad
    )


def inflate(interval: PredictionInterval, epsilon_total: float) -> PredictionInterval:
    """Widen both ends by ``epsilon_total`` (>= 0); infinite ends absorb it."""
    if epsilon_total < 0:
        raise ConfigInvalid(f"epsilon_total must be >= 0, got {epsilon_total}")
    if interval.is_empty:
        return interval
    return PredictionInterval(interval.lower - epsilon_total, interval.upper + epsilon_total)


def stability_delta(B: int, theta: float, epsilon: float, lower: float, upper: float) -> float:
    """Concentration failure bound for a mean-aggregated bounded ensemble.

    delta = 2 exp(-2 sqrt(B) theta eps^2 / (u - l)^2)
          + exp(-(sqrt(B) - 1)^2 theta^2 / 2)

    The value may exceed 1 (a vacuous bound, e.g. whenever B = 1); callers
    clamp for reporting.
    """
    if B < 1:
        raise ConfigInvalid(f"B must be >= 1, got {B}")
    if not (0.0 < theta <= 1.0):
        raise ConfigInvalid(f"theta must lie in (0, 1], got {theta}")
    if epsilon <= 0:
        raise ConfigInvalid(f"epsilon must be > 0, got {epsilon}")
    if not (upper > lower):
        raise ConfigInvalid("need upper > lower output bounds")
    root_b = math.sqrt(B)
    spread = upper - lower
    first = 2.0 * math.exp(-2.0 * root_b * theta * epsilon * epsilon / (spread * spread))
    second = math.exp(-((root_b - 1.0) ** 2) * theta * theta / 2.0)
    return first + second


# ---------------------------------------------------------------------------
# Jackknife and jackknife+ baselines
# ---------------------------------------------------------------------------


@dataclass
class JackknifeFit:
    """Full-data model plus leave-one-out residuals (n + 1 base fits)."""

    model: FittedModel
    residuals: LooResiduals
    counters: CallCounters


def fit_jackknife(
    data: Dataset, regressor_spec: RegressorSpec, rng_key: RngKey | None = None
) -> JackknifeFit:
    """Fit the full model and the n leave-one-out models for their residuals."""
    if data.n < 2:
        raise EmptyInput(f"need at least 2 training points, got {data.n}")
    key = rng_key if rng_key is not None else RngKey(0)
    counters = CallCounters()
    model = fit(regressor_spec, data.features, data.responses, fit_key=key.child(0))
    counters.r_calls += 1
    res = np.empty(data.n)
    for i in range(data.n):
        keep = np.arange(data.n) != i
        loo = fit(
            regressor_spec,
            data.features[keep],
            data.responses[keep],
            fit_key=key.child(1 + i),
        )
        counters.r_calls += 1
        res[i] = abs(data.responses[i] - loo.predict(data.features[i]))
        counters.evals += 1
    return JackknifeFit(model=model, residuals=LooResiduals(res), counters=counters)


def predict_jackknife(fit_state: JackknifeFit, x, alpha: float) -> PredictionInterval:
    """Symmetric interval: full-model prediction +/- the residual quantile."""
    fit_state.counters.evals += 1
    center = float(fit_state.model.predict(np.asarray(x, dtype=np.float64)))
    half = q_plus(fit_state.residuals.values, alpha)
    return PredictionInterval.from_endpoints(center - half, center + half)


class JplusVariant(enum.Enum):
    BASE_LEARNER = "base"
    ENSEMBLE_LEARNER = "ensemble"


@dataclass
class JplusFit:
    """Leave-one-out predictors (base or ensembled) with their residuals."""

    loo_predictors: list[Callable[[np.ndarray], float]]
    residuals: LooResiduals
    counters: CallCounters
    variant: JplusVariant
    members_per_loo: int = 0


def fit_jplus(
    data: Dataset,
    config: MethodConfig,
    variant: JplusVariant,
    rng_key: RngKey | None = None,
) -> JplusFit:
    """Fit the jackknife+ leave-one-out models.

    With ``BASE_LEARNER`` each leave-one-out model is a single base fit
    (n base fits total). With ``ENSEMBLE_LEARNER`` each is a full ensemble
    refit on the n-1 remaining points, costing B * n base fits; this is the
    expensive construction the out-of-bag ensemble exists to avoid, kept as
    a comparison estimator. The ensemble variant needs a fixed member count.
    """
    if data.n < 2:
        raise EmptyInput(f"need at least 2 training points, got {data.n}")
    key = rng_key if rng_key is not None else config.rng_key()
    counters = CallCounters()
    if variant is JplusVariant.ENSEMBLE_LEARNER and not isinstance(config.b_mode, FixedB):
        raise ConfigInvalid("the ensembled jackknife+ comparison requires a fixed member count")

    ensembled = variant is JplusVariant.ENSEMBLE_LEARNER
    loo_predictors: list[Callable] = []
    res = np.empty(data.n)
    for i in range(data.n):
        keep = np.arange(data.n) != i
        sub = Dataset(data.features[keep], data.responses[keep])
        if ensembled:
            predictor = _fit_loo_ensemble(sub, config, key.child(i), counters)
        else:
            model = fit(config.regressor_spec, sub.features, sub.responses, fit_key=key.child(i))
            counters.r_calls += 1
            predictor = model.predict
        loo_predictors.append(predictor)
        res[i] = abs(data.responses[i] - float(predictor(data.features[i])))
        counters.evals += config.b_mode.b if ensembled else 1
        if ensembled:
            counters.phi_calls += 1
    return JplusFit(
        loo_predictors=loo_predictors,
        residuals=LooResiduals(res),
        counters=counters,
        variant=variant,
        members_per_loo=config.b_mode.b if ensembled else 0,
    )


def _fit_loo_ensemble(sub: Dataset, config: MethodConfig, key: RngKey, counters: CallCounters):
    b = config.b_mode.b
    sample_rng = key.child(_STREAM_SAMPLES).generator()
    members = []
    for j in range(b):
        s = draw_sample(sub.n, config.m, config.sampling_mode, sample_rng)
        members.append(
            fit(config.regressor_spec, *_rows(sub, s), fit_key=key.child(_STREAM_FIT, j))
        )
        counters.r_calls += 1
    spec = config.aggregation_spec

    def predictor(x, _members=members, _spec=spec):
        return aggregate(_spec, [m.predict(x) for m in _members])

    return predictor


def predict_jplus(fit_state: JplusFit, x, alpha: float) -> PredictionInterval:
    """Jackknife+ interval: quantiles of loo predictions shifted by residuals."""
    q = np.asarray(x, dtype=np.float64)
    vals = np.array([float(p(q)) for p in fit_state.loo_predictors])
    n = vals.size
    if fit_state.variant is JplusVariant.ENSEMBLE_LEARNER:
        fit_state.counters.evals += n * fit_state.members_per_loo
        fit_state.counters.phi_calls += n
    else:
        fit_state.counters.evals += n
    r = fit_state.residuals.values
    return PredictionInterval.from_endpoints(q_minus(vals - r, alpha), q_plus(vals + r, alpha))


# ---------------------------------------------------------------------------
# Conformity-score generalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AbsoluteResidual:
    """Score |y - prediction|: recovers the plain J+aB interval."""


@dataclass(frozen=True)
class ScaledResidual:
    """Score |y - prediction| / scale for a fixed positive scale."""

    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ConfigInvalid(f"scale must be > 0, got {self.scale}")


@dataclass(frozen=True)
class GenericScore:
    """Arbitrary conformity score fn(prediction, y); inverted on a response grid."""

    fn: Callable[[float, float], float]


ConformityScore = AbsoluteResidual | ScaledResidual | GenericScore


def _score_value(score: ConformityScore, prediction: float, y: float) -> float:
    if isinstance(score, AbsoluteResidual):
        return abs(y - prediction)
    if isinstance(score, ScaledResidual):
        return abs(y - prediction) / score.scale
    return float(score.fn(prediction, y))


def predict_score_jab(
    ensemble: JabEnsemble,
    score: ConformityScore,
    x,
    alpha: float | None = None,
    y_grid: np.ndarray | None = None,
    training_scores: np.ndarray | None = None,
) -> list[PredictionInterval]:
    """Conformity-score prediction set at one test point.

    A candidate y belongs to the set when fewer than ``(1 - alpha)(n + 1)``
    training points i have score(loo prediction at x, y) exceeding that
    point's own training score. For the residual-shaped scores this count
    condition inverts analytically into a single interval (possibly empty);
    any other score needs an explicit ``y_grid``, and the result is the
    union of grid runs passing the count test, returned as a list of
    disjoint intervals.
    """
    a = ensemble.alpha if alpha is None else alpha
    loo_at_x = ensemble.loo_values_at(np.asarray(x, dtype=np.float64))
    if training_scores is None:
        training_scores = np.array(
            [
                _score_value(score, ensemble.loo_train_predictions[i], ensemble.data.responses[i])
                for i in range(ensemble.n)
            ]
        )
    else:
        training_scores = np.asarray(training_scores, dtype=np.float64)
        if training_scores.shape != (ensemble.n,):
            raise ConfigInvalid("training_scores must have one entry per training point")

    if isinstance(score, (AbsoluteResidual, ScaledResidual)):
        # score(mu, y) <= c  <=>  |y - mu| <= radius, so the count condition
        # becomes the familiar pair of order-statistic quantiles.
        radius = training_scores * (score.scale if isinstance(score, ScaledResidual) else 1.0)
        lower = q_minus(loo_at_x - radius, a)
        upper = q_plus(loo_at_x + radius, a)
        if lower > upper:
            return []
        return [PredictionInterval(lower, upper)]

    if y_grid is None:
        raise UnsupportedScore(
            "a generic conformity score cannot be inverted analytically; supply y_grid"
        )
    grid = np.asarray(y_grid, dtype=np.float64).ravel()
    if grid.size == 0:
        raise EmptyInput("y_grid is empty")
    grid = np.sort(grid)
    threshold = ceil_snap((1.0 - a) * (ensemble.n + 1))
    passing = np.empty(grid.size, dtype=bool)
    for g, y in enumerate(grid):
        count = sum(
            1
            for i in range(ensemble.n)
            if _score_value(score, loo_at_x[i], y) > training_scores[i]
        )
        passing[g] = count < threshold
    return _runs_to_intervals(grid, passing)


def _runs_to_intervals(grid: np.ndarray, passing: np.ndarray) -> list[PredictionInterval]:
    intervals: list[PredictionInterval] = []
    start = None
    for g, ok in enumerate(passing):
        if ok and start is None:
            start = g
        elif not ok and start is not None:
            intervals.append(PredictionInterval(grid[start], grid[g - 1]))
            start = None
    if start is not None:
        intervals.append(PredictionInterval(grid[start], grid[-1]))
    return intervals


# ---------------------------------------------------------------------------
# Stability diagnostics
# ---------------------------------------------------------------------------


def ensemble_stability_diagnostic(
    data: Dataset,
    config: MethodConfig,
    epsilon: float,
    n_replicates: int = 200,
    rng_key: RngKey | None = None,
) -> float:
    """Monte Carlo estimate of the concentration failure rate delta.

    Re-runs the ensemble stage ``n_replicates`` times (fresh resamples, same
    data), takes the per-replicate leave-one-out aggregates at their own
    training points, and reports the worst per-point frequency of deviating
    more than ``epsilon`` from the per-point Monte Carlo mean. This is a
    diagnostic estimate, not a certified bound.
    """
    if epsilon <= 0:
        raise ConfigInvalid(f"epsilon must be > 0, got {epsilon}")
    if n_replicates < 2:
        raise ConfigInvalid("need at least 2 replicates")
    key = rng_key if rng_key is not None else config.rng_key()
    vals = np.empty((n_replicates, data.n))
    for r in range(n_replicates):
        ensemble, _ = fit_jab(data, config, rng_key=key.child(r))
        vals[r] = ensemble.loo_train_predictions
    center = vals.mean(axis=0)
    exceed = np.abs(vals - center) > epsilon
    return float(exceed.mean(axis=0).max())


def theorem_levels(alpha: float, params) -> dict:
    """Analytic coverage annotations for inflated intervals under stability.

    Returns the fixed-count level ``1 - 2 alpha - 4 sqrt(delta)`` and, when
    the starred out-of-sample parameters are present, the stronger
    ``1 - alpha - 3 sqrt(delta) - 4 sqrt(delta_star)`` level.
    """
    out = {"fixed_b_level": 1.0 - 2.0 * alpha - 4.0 * math.sqrt(params.delta)}
    if params.delta_star is not None:
        out["out_of_sample_level"] = (
            1.0 - alpha - 3.0 * math.sqrt(params.delta) - 4.0 * math.sqrt(params.delta_star)
        )
    return out
