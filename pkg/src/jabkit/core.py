"""Core domain types: datasets, method configuration, intervals, seeded RNG.

Everything here is immutable after construction and safe to share across
threads. Randomness never comes from a global generator: callers hold an
:class:`RngKey` and derive independent child streams from it, which makes
every run replayable bit-for-bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, DimensionMismatch, EmptyInput, NonFiniteValue

_MAX_SEED = 2**64


@dataclass(frozen=True)
class RngKey:
    """Splittable deterministic randomness source.

    Identical ``(seed, path)`` pairs produce identical draw sequences on any
    platform; distinct paths give statistically independent streams. Derive
    per-task streams with :meth:`child` instead of sharing one generator.
    """

    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not (0 <= self.seed < _MAX_SEED):
            raise ConfigInvalid(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def child(self, *ids: int) -> "RngKey":
        """Return an independent sub-key extending this key's stream path."""
        return RngKey(self.seed, self.path + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        """Fresh generator for this key; repeated calls replay the same draws."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(ss))


class SamplingMode(enum.Enum):
    WITH_REPLACEMENT = "with"
    WITHOUT_REPLACEMENT = "without"


@dataclass(frozen=True)
class FixedB:
    """Run the ensemble with exactly ``b`` members."""

    b: int

    def __post_init__(self) -> None:
        if self.b < 0:
            raise ConfigInvalid(f"fixed ensemble size must be >= 0, got {self.b}")


@dataclass(frozen=True)
class RandomB:
    """Draw the member count from Binomial(b_tilde, keep probability)."""

    b_tilde: int

    def __post_init__(self) -> None:
        if self.b_tilde < 1:
            raise ConfigInvalid(f"b_tilde must be >= 1, got {self.b_tilde}")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (n x p) paired with a response vector of length n.

    Construct through :func:`validate_dataset`; arrays are copied, cast to
    float64 and frozen, so reading them back is the identity.
    """

    features: np.ndarray
    responses: np.ndarray

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        """Rows at ``indices`` (duplicates allowed), as a new Dataset."""
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(_frozen(self.features[idx]), _frozen(self.responses[idx]))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def validate_dataset(raw_features, raw_responses) -> Dataset:
    """Validate and freeze raw arrays into a :class:`Dataset`.

    Raises
    ------
    DimensionMismatch
        If the feature matrix is not 2-D, the responses are not 1-D, or the
        row counts differ.
    NonFiniteValue
        If any entry is NaN or infinite.
    EmptyInput
        If there are zero rows or zero feature columns.
    """
    x = np.asarray(raw_features, dtype=np.float64)
    y = np.asarray(raw_responses, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatch(f"features must be 2-D, got ndim={x.ndim}")
    if y.ndim != 1:
        raise DimensionMismatch(f"responses must be 1-D, got ndim={y.ndim}")
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatch(
            f"feature rows ({x.shape[0]}) != response length ({y.shape[0]})"
        )
    if x.shape[0] == 0 or x.shape[1] == 0:
        raise EmptyInput("dataset must have at least one row and one feature column")
    if not np.all(np.isfinite(x)):
        raise NonFiniteValue("features contain NaN or infinity")
    if not np.all(np.isfinite(y)):
        raise NonFiniteValue("responses contain NaN or infinity")
    return Dataset(_frozen(x.copy()), _frozen(y.copy()))


@dataclass(frozen=True)
class PredictionInterval:
    """Closed interval [lower, upper]; +/-inf endpoints mark unbounded sides.

    The one permitted violation of ``lower <= upper`` is the canonical empty
    interval ``(+inf, -inf)``, which arises from the quantile construction
    when the miscoverage level exceeds 1/2. It contains nothing and has
    width zero.
    """

    lower: float
    upper: float

    def __post_init__(self) -> None:
        lo, up = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(up):
            raise NonFiniteValue("interval endpoints must not be NaN")
        if lo > up and not (math.isinf(lo) and math.isinf(up) and lo > 0 > up):
            raise ConfigInvalid(f"interval lower ({lo}) exceeds upper ({up})")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @classmethod
    def empty(cls) -> "PredictionInterval":
        return cls(math.inf, -math.inf)

    @classmethod
    def from_endpoints(cls, lower: float, upper: float) -> "PredictionInterval":
        """Build an interval, collapsing an inverted endpoint pair to empty."""
        if lower > upper:
            return cls.empty()
        return cls(lower, upper)

    @property
    def is_empty(self) -> bool:
        return self.lower > self.upper

    @property
    def is_finite(self) -> bool:
        return self.is_empty or (math.isfinite(self.lower) and math.isfinite(self.upper))

    @property
    def width(self) -> float:
        if self.is_empty:
            return 0.0
        return self.upper - self.lower

    def contains(self, y: float) -> bool:
        return self.lower <= y <= self.upper

    def contains_interval(self, other: "PredictionInterval") -> bool:
        if other.is_empty:
            return True
        return self.lower <= other.lower and other.upper <= self.upper


@dataclass(frozen=True)
class StabilityParams:
    """Concentration parameters for out-of-bag aggregates.

    ``epsilon``/``delta`` bound how far a leave-one-out aggregate strays from
    its resampling-measure expectation; the starred pair additionally bounds
    the out-of-sample perturbation from dropping one training point. They
    feed the inflated-interval coverage annotations.
    """

    epsilon: float
    delta: float
    epsilon_star: float | None = None
    delta_star: float | None = None

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise ConfigInvalid("epsilon must be >= 0")
        if not (0 < self.delta < 1):
            raise ConfigInvalid("delta must lie in (0, 1)")
        if (self.epsilon_star is None) != (self.delta_star is None):
            raise ConfigInvalid("epsilon_star and delta_star must be given together")
        if self.epsilon_star is not None and self.epsilon_star < 0:
            raise ConfigInvalid("epsilon_star must be >= 0")
        if self.delta_star is not None and not (0 < self.delta_star < 1):
            raise ConfigInvalid("delta_star must lie in (0, 1)")


@dataclass(frozen=True)
class MethodConfig:
    """All knobs for one interval estimator run.

    ``m`` is the resample size, ``b_mode`` fixes or randomizes the member
    count, and ``seed`` anchors every random draw made on behalf of this
    configuration.
    """

    alpha: float
    m: int
    sampling_mode: SamplingMode
    b_mode: FixedB | RandomB
    regressor_spec: object
    aggregation_spec: object
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 1.0):
            raise ConfigInvalid(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.m < 1:
            raise ConfigInvalid(f"resample size m must be >= 1, got {self.m}")
        if not isinstance(self.sampling_mode, SamplingMode):
            raise ConfigInvalid(f"bad sampling mode: {self.sampling_mode!r}")
        if not isinstance(self.b_mode, (FixedB, RandomB)):
            raise ConfigInvalid(f"bad b_mode: {self.b_mode!r}")
        if not (0 <= self.seed < _MAX_SEED):
            raise ConfigInvalid(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def rng_key(self) -> RngKey:
        return RngKey(self.seed)


@dataclass
class CallCounters:
    """Exact call accounting: base-learner fits, model evaluations, aggregations."""

    r_calls: int = 0
    evals: int = 0
    phi_calls: int = 0

    def as_dict(self) -> dict:
        return {"r_calls": self.r_calls, "evals": self.evals, "phi_calls": self.phi_calls}

    def add(self, other: "CallCounters") -> None:
        self.r_calls += other.r_calls
        self.evals += other.evals
        self.phi_calls += other.phi_calls
