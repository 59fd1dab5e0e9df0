"""Coverage/width experiment runner over repeated train-test splits.

A plan names a data source (CSV file or synthetic generator), split sizes,
and a list of interval methods with their configurations. Each split draws
a train-test partition uniformly without replacement, fits every method,
predicts the whole test set, and records coverage, widths, and the exact
call counters. Runs are deterministic functions of the plan, including its
seed: each (split, method) pair works from its own derived random stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .aggregation import Mean, Median, TrimmedMean
from .core import (
    CallCounters,
    Dataset,
    FixedB,
    MethodConfig,
    PredictionInterval,
    RngKey,
    SamplingMode,
    StabilityParams,
)
from .csvio import load_csv
from .errors import ConfigInvalid, DimensionMismatch, JabkitError
from .intervals import (
    JplusVariant,
    fit_jab,
    fit_jackknife,
    fit_jplus,
    predict_jab_batch,
    predict_jackknife,
    predict_jmm_ab,
    predict_jplus,
    theorem_levels,
)
from .regressors import ForestSpec, KnnSpec, RidgeSpec, TreeSpec
from .resampling import draw_sample
from .synthetic import FriedmanSpec, LinearGaussianSpec, SyntheticSpec, generate

METHOD_NAMES = ("jab", "jplus_ensemble", "jplus_base", "jackknife", "jmm_ab")

# Stream ids inside one split.
_STREAM_DATA = 0
_STREAM_SPLIT = 1
_STREAM_METHOD_BASE = 2


@dataclass(frozen=True)
class CsvSource:
    path: str
    response_col: str | int


DataSource = CsvSource | SyntheticSpec


@dataclass(frozen=True)
class MethodPlan:
    name: str
    config: MethodConfig

    def __post_init__(self) -> None:
        if self.name not in METHOD_NAMES:
            raise ConfigInvalid(f"unknown method {self.name!r}; choose from {METHOD_NAMES}")


@dataclass(frozen=True)
class ExperimentPlan:
    source: DataSource
    n_train: int
    n_test: int
    n_splits: int
    methods: tuple[MethodPlan, ...]
    seed: int = 0
    stability: StabilityParams | None = None

    def __post_init__(self) -> None:
        if self.n_train < 1 or self.n_test < 1 or self.n_splits < 1:
            raise ConfigInvalid("need n_train >= 1, n_test >= 1, n_splits >= 1")
        object.__setattr__(self, "methods", tuple(self.methods))


@dataclass
class SplitResult:
    coverage: float
    mean_width: float | None
    infinite_count: int
    counters: CallCounters

    def to_dict(self) -> dict:
        return {
            "coverage": self.coverage,
            "mean_width": self.mean_width,
            "infinite_count": self.infinite_count,
            "counters": self.counters.as_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitResult":
        return cls(
            coverage=d["coverage"],
            mean_width=d["mean_width"],
            infinite_count=d["infinite_count"],
            counters=CallCounters(**d["counters"]),
        )


@dataclass
class MethodResult:
    method: str
    splits: list[SplitResult] = field(default_factory=list)
    error: str | None = None

    def to_dict(self) -> dict:
        out = {"method": self.method, "splits": [s.to_dict() for s in self.splits]}
        if self.error is not None:
            out["error"] = self.error
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "MethodResult":
        return cls(
            method=d["method"],
            splits=[SplitResult.from_dict(s) for s in d["splits"]],
            error=d.get("error"),
        )


@dataclass
class RunReport:
    config: dict
    results: list[MethodResult]
    annotations: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "results": [r.to_dict() for r in self.results],
            "annotations": self.annotations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(
            config=d["config"],
            results=[MethodResult.from_dict(r) for r in d["results"]],
            annotations=d["annotations"],
        )


def coverage(intervals: list[PredictionInterval], truths) -> float:
    """Fraction of responses inside their (closed) intervals."""
    y = np.asarray(truths, dtype=np.float64).ravel()
    if len(intervals) != y.size:
        raise DimensionMismatch(f"{len(intervals)} intervals vs {y.size} truths")
    if y.size == 0:
        raise DimensionMismatch("cannot compute coverage of an empty test set")
    hits = sum(1 for itv, yy in zip(intervals, y) if itv.contains(float(yy)))
    return hits / y.size


def _summarize_widths(intervals: list[PredictionInterval]) -> tuple[float | None, int]:
    finite = [itv.width for itv in intervals if itv.is_finite]
    infinite = len(intervals) - len(finite)
    mean_width = float(np.mean(finite)) if finite else None
    return mean_width, infinite


def _predict_method(plan: MethodPlan, train: Dataset, x_test: np.ndarray, key: RngKey):
    cfg = plan.config
    if plan.name == "jab":
        ensemble, residuals = fit_jab(train, cfg, rng_key=key)
        return predict_jab_batch(ensemble, residuals, x_test), ensemble.counters
    if plan.name == "jmm_ab":
        ensemble, residuals = fit_jab(train, cfg, rng_key=key)
        intervals = [predict_jmm_ab(ensemble, residuals, x) for x in x_test]
        return intervals, ensemble.counters
    if plan.name == "jplus_ensemble":
        state = fit_jplus(train, cfg, JplusVariant.ENSEMBLE_LEARNER, rng_key=key)
        return [predict_jplus(state, x, cfg.alpha) for x in x_test], state.counters
    if plan.name == "jplus_base":
        state = fit_jplus(train, cfg, JplusVariant.BASE_LEARNER, rng_key=key)
        return [predict_jplus(state, x, cfg.alpha) for x in x_test], state.counters
    if plan.name == "jackknife":
        state = fit_jackknife(train, cfg.regressor_spec, rng_key=key)
        return [predict_jackknife(state, x, cfg.alpha) for x in x_test], state.counters
    raise ConfigInvalid(f"unknown method {plan.name!r}")


def _split_data(
    plan: ExperimentPlan, split: int, base: RngKey, csv_pool: Dataset | None
) -> tuple[Dataset, Dataset]:
    want = plan.n_train + plan.n_test
    if csv_pool is not None:
        pool = csv_pool
    else:
        pool = generate(plan.source, want, base.child(split, _STREAM_DATA))
    if want > pool.n:
        raise ConfigInvalid(
            f"n_train + n_test = {want} exceeds the {pool.n} available rows"
        )
    idx = draw_sample(
        pool.n, want, SamplingMode.WITHOUT_REPLACEMENT,
        base.child(split, _STREAM_SPLIT).generator(),
    ).indices
    return pool.subset(idx[: plan.n_train]), pool.subset(idx[plan.n_train :])


def run_experiment(plan: ExperimentPlan) -> RunReport:
    """Execute the plan and assemble a report.

    A method that raises mid-run is recorded with its error message and the
    splits it completed; other methods continue unaffected.
    """
    base = RngKey(plan.seed)
    csv_pool = (
        load_csv(plan.source.path, plan.source.response_col)
        if isinstance(plan.source, CsvSource)
        else None
    )
    results = [MethodResult(method=mp.name) for mp in plan.methods]
    for split in range(plan.n_splits):
        train, test = _split_data(plan, split, base, csv_pool)
        for j, mp in enumerate(plan.methods):
            res = results[j]
            if res.error is not None:
                continue
            try:
                intervals, counters = _predict_method(
                    mp, train, test.features, base.child(split, _STREAM_METHOD_BASE + j)
                )
            except JabkitError as exc:
                res.error = f"split {split}: {exc}"
                continue
            mean_width, infinite_count = _summarize_widths(intervals)
            res.splits.append(
                SplitResult(
                    coverage=coverage(intervals, test.responses),
                    mean_width=mean_width,
                    infinite_count=infinite_count,
                    counters=counters,
                )
            )
    annotations = _annotations(plan)
    return RunReport(config=_echo_config(plan), results=results, annotations=annotations)


def _annotations(plan: ExperimentPlan) -> dict:
    alpha = plan.methods[0].config.alpha if plan.methods else None
    out: dict = {"floor_1_minus_2alpha": None if alpha is None else 1.0 - 2.0 * alpha}
    if plan.stability is not None and alpha is not None:
        levels = theorem_levels(alpha, plan.stability)
        out["theorem_s2_level"] = levels["fixed_b_level"]
        if "out_of_sample_level" in levels:
            out["theorem_s3_level"] = levels["out_of_sample_level"]
    return out


# --- config serialization -------------------------------------------------


def _spec_dict(spec) -> dict:
    if isinstance(spec, RidgeSpec):
        return {"kind": "ridge", "lambda_factor": spec.lambda_factor}
    if isinstance(spec, KnnSpec):
        return {"kind": "knn", "k": spec.k}
    if isinstance(spec, TreeSpec):
        return {"kind": "tree", "max_depth": spec.max_depth, "min_leaf": spec.min_leaf}
    if isinstance(spec, ForestSpec):
        return {
            "kind": "forest",
            "n_trees": spec.n_trees,
            "max_depth": spec.max_depth,
            "min_leaf": spec.min_leaf,
            "feature_subsample": spec.feature_subsample,
        }
    if isinstance(spec, Mean):
        return {"kind": "mean"}
    if isinstance(spec, Median):
        return {"kind": "median"}
    if isinstance(spec, TrimmedMean):
        return {"kind": "trimmed_mean", "proportion_cut": spec.proportion_cut}
    raise ConfigInvalid(f"unknown spec: {spec!r}")


def _method_config_dict(cfg: MethodConfig) -> dict:
    if isinstance(cfg.b_mode, FixedB):
        b_mode = {"kind": "fixed", "b": cfg.b_mode.b}
    else:
        b_mode = {"kind": "random", "b_tilde": cfg.b_mode.b_tilde}
    return {
        "alpha": cfg.alpha,
        "m": cfg.m,
        "sampling": cfg.sampling_mode.value,
        "b_mode": b_mode,
        "regressor": _spec_dict(cfg.regressor_spec),
        "aggregation": _spec_dict(cfg.aggregation_spec),
        "seed": cfg.seed,
    }


def _echo_config(plan: ExperimentPlan) -> dict:
    if isinstance(plan.source, CsvSource):
        source = {"kind": "csv", "path": str(plan.source.path),
                  "response_col": plan.source.response_col}
    elif isinstance(plan.source, LinearGaussianSpec):
        source = {"kind": "linear", "p": plan.source.p,
                  "coef_scale": plan.source.coef_scale, "noise_sd": plan.source.noise_sd}
    elif isinstance(plan.source, FriedmanSpec):
        source = {"kind": "friedman", "p": plan.source.p, "noise_sd": plan.source.noise_sd}
    else:
        raise ConfigInvalid(f"unknown data source: {plan.source!r}")
    out = {
        "source": source,
        "n_train": plan.n_train,
        "n_test": plan.n_test,
        "n_splits": plan.n_splits,
        "seed": plan.seed,
        "methods": [
            {"name": mp.name, **_method_config_dict(mp.config)} for mp in plan.methods
        ],
    }
    if plan.stability is not None:
        out["stability"] = {
            "epsilon": plan.stability.epsilon,
            "delta": plan.stability.delta,
            "epsilon_star": plan.stability.epsilon_star,
            "delta_star": plan.stability.delta_star,
        }
    return out
