"""Predictive intervals from out-of-bag bootstrap ensembles.

Fit one ensemble; get distribution-free prediction intervals for free by
aggregating, for each training point, only the members whose resample
missed it. The package also ships the classical jackknife/jackknife+
baselines, a conservative min-max variant, a conformity-score
generalization, an experiment harness, and an executable-oracle layer that
checks the method's coverage argument on real runs.
"""

from .aggregation import AggregationSpec, Mean, Median, TrimmedMean, aggregate
from .core import (
    CallCounters,
    Dataset,
    FixedB,
    MethodConfig,
    PredictionInterval,
    RandomB,
    RngKey,
    SamplingMode,
    StabilityParams,
    validate_dataset,
)
from .csvio import load_csv
from .errors import (
    ConfigInvalid,
    DimensionMismatch,
    EmptyInput,
    JabkitError,
    NonFiniteValue,
    NumericalFailure,
    ParseError,
    UnsupportedScore,
)
from .experiment import (
    CsvSource,
    ExperimentPlan,
    MethodPlan,
    MethodResult,
    RunReport,
    SplitResult,
    coverage,
    run_experiment,
)
from .intervals import (
    AbsoluteResidual,
    GenericScore,
    JabEnsemble,
    JackknifeFit,
    JplusFit,
    JplusVariant,
    LooResiduals,
    ScaledResidual,
    ensemble_stability_diagnostic,
    fit_jab,
    fit_jackknife,
    fit_jplus,
    inflate,
    predict_jab,
    predict_jab_batch,
    predict_jackknife,
    predict_jmm_ab,
    predict_jplus,
    predict_score_jab,
    stability_delta,
    theorem_levels,
)
from .oracle import LiftedRun, couple, coupling_check, lifted_residuals, s_alpha, tournament
from .quantiles import q_minus, q_plus, quantile_index
from .regressors import (
    FittedModel,
    ForestSpec,
    KnnSpec,
    RegressorSpec,
    RidgeSpec,
    TreeSpec,
    fit,
    ridge_penalty,
    spectral_norm_sq,
)
from .report import emit_report, report_from_json, report_to_json
from .resampling import (
    IndexSample,
    MatchVariant,
    draw_B,
    draw_sample,
    exclusion_probability,
    keep_probability,
    matched_b_tilde,
)
from .synthetic import FriedmanSpec, LinearGaussianSpec, SyntheticSpec, generate

__version__ = "0.1.0"

__all__ = [
    "AbsoluteResidual",
    "AggregationSpec",
    "CallCounters",
    "ConfigInvalid",
    "CsvSource",
    "Dataset",
    "DimensionMismatch",
    "EmptyInput",
    "ExperimentPlan",
    "FittedModel",
    "FixedB",
    "ForestSpec",
    "FriedmanSpec",
    "GenericScore",
    "IndexSample",
    "JabEnsemble",
    "JabkitError",
    "JackknifeFit",
    "JplusFit",
    "JplusVariant",
    "KnnSpec",
    "LiftedRun",
    "LinearGaussianSpec",
    "LooResiduals",
    "MatchVariant",
    "Mean",
    "Median",
    "MethodConfig",
    "MethodPlan",
    "MethodResult",
    "NonFiniteValue",
    "NumericalFailure",
    "ParseError",
    "PredictionInterval",
    "RandomB",
    "RegressorSpec",
    "RidgeSpec",
    "RngKey",
    "RunReport",
    "SamplingMode",
    "ScaledResidual",
    "SplitResult",
    "StabilityParams",
    "SyntheticSpec",
    "TreeSpec",
    "TrimmedMean",
    "UnsupportedScore",
    "aggregate",
    "couple",
    "coupling_check",
    "coverage",
    "draw_B",
    "draw_sample",
    "emit_report",
    "ensemble_stability_diagnostic",
    "exclusion_probability",
    "fit",
    "fit_jab",
    "fit_jackknife",
    "fit_jplus",
    "generate",
    "inflate",
    "keep_probability",
    "lifted_residuals",
    "load_csv",
    "matched_b_tilde",
    "predict_jab",
    "predict_jab_batch",
    "predict_jackknife",
    "predict_jmm_ab",
    "predict_jplus",
    "predict_score_jab",
    "q_minus",
    "q_plus",
    "quantile_index",
    "report_from_json",
    "report_to_json",
    "ridge_penalty",
    "run_experiment",
    "s_alpha",
    "spectral_norm_sq",
    "stability_delta",
    "theorem_levels",
    "tournament",
    "validate_dataset",
]
