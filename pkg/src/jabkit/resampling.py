"""Index resampling, member-count draws, and ensemble-size matching.

The ensemble methods here never touch data values: they draw ordered index
multisets (with or without replacement), draw the random member count from
its Binomial distribution, and compute the matching formulas that keep
different estimators comparable in expected fitting cost.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .core import SamplingMode
from .errors import ConfigInvalid
from .quantiles import floor_snap

# Below this ensemble size a Binomial draw is taken as explicit Bernoulli
# trials, which is exact and cheap; above it inverse-CDF sampling is used.
_BERNOULLI_LIMIT = 10_000


@dataclass(frozen=True)
class IndexSample:
    """One resample: an ordered multiset of row indices from a pool of size n_pool."""

    indices: np.ndarray
    mode: SamplingMode
    n_pool: int

    def __post_init__(self) -> None:
        idx = np.array(self.indices, dtype=np.int64, copy=True)
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        if idx.ndim != 1 or idx.size == 0:
            raise ConfigInvalid("an index sample must be a non-empty 1-D list")
        if idx.min() < 0 or idx.max() >= self.n_pool:
            raise ConfigInvalid("sample indices out of range")
        if self.mode is SamplingMode.WITHOUT_REPLACEMENT and np.unique(idx).size != idx.size:
            raise ConfigInvalid("without-replacement sample contains duplicates")

    @property
    def m(self) -> int:
        return int(self.indices.size)

    def contains(self, i: int) -> bool:
        return bool(np.any(self.indices == i))


def draw_sample(n: int, m: int, mode: SamplingMode, rng: np.random.Generator) -> IndexSample:
    """Draw one uniform index sample of size m from {0, ..., n-1}.

    With replacement the indices are i.i.d. uniform; without replacement a
    partial Fisher-Yates shuffle yields an exactly uniform ordered draw of
    distinct indices (requires m <= n).
    """
    if n < 1 or m < 1:
        raise ConfigInvalid(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    if mode is SamplingMode.WITH_REPLACEMENT:
        idx = rng.integers(0, n, size=m, dtype=np.int64)
    else:
        if m > n:
            raise ConfigInvalid(f"without replacement requires m <= n, got m={m}, n={n}")
        pool = np.arange(n, dtype=np.int64)
        for j in range(m):
            r = j + int(rng.integers(n - j))
            pool[j], pool[r] = pool[r], pool[j]
        idx = pool[:m]
    return IndexSample(idx, mode, n)


def exclusion_probability(pool: int, m: int, mode: SamplingMode) -> float:
    """Probability that one size-m draw from a pool misses a fixed element."""
    if pool < 1 or m < 1:
        raise ConfigInvalid(f"need pool >= 1 and m >= 1, got pool={pool}, m={m}")
    if mode is SamplingMode.WITH_REPLACEMENT:
        return (1.0 - 1.0 / pool) ** m
    if m > pool:
        raise ConfigInvalid(f"without replacement requires m <= pool, got m={m}, pool={pool}")
    return 1.0 - m / pool


def keep_probability(n: int, m: int, mode: SamplingMode) -> float:
    """Member-keep probability theta over the lifted pool of size n + 1.

    This is the success probability of the Binomial member count: the chance
    that a resample of the n training points, viewed inside the augmented
    pool of n + 1 exchangeable points, misses the held-out one. Stability
    bounds that exclude a point from an n-point pool instead want
    :func:`exclusion_probability` at pool size n.
    """
    return exclusion_probability(n + 1, m, mode)


def draw_B(b_tilde: int, theta: float, rng: np.random.Generator) -> int:
    """One draw from Binomial(b_tilde, theta)."""
    if b_tilde < 1:
        raise ConfigInvalid(f"b_tilde must be >= 1, got {b_tilde}")
    if not (0.0 < theta <= 1.0):
        raise ConfigInvalid(f"theta must lie in (0, 1], got {theta}")
    if theta == 1.0:
        return b_tilde
    if b_tilde <= _BERNOULLI_LIMIT:
        return int(np.count_nonzero(rng.random(b_tilde) < theta))
    return int(binom.ppf(rng.random(), b_tilde, theta))


class MatchVariant(enum.Enum):
    """Which cost is matched when sizing a randomized ensemble.

    ``PER_LOO_MODEL`` matches the expected number of members aggregated into
    each leave-one-out model against an ensemble-based jackknife+ run with
    ``target_B`` members. ``FIXED_TOTAL`` matches the expected total number
    of fitted members against a fixed-size run with ``target_B`` members.
    """

    PER_LOO_MODEL = "jab_vs_jensemble"
    FIXED_TOTAL = "jab_fixed_total"


def matched_b_tilde(target_B: int, n: int, m: int, variant: MatchVariant) -> int:
    """Integer part of the ensemble-size matching formula for ``variant``."""
    if target_B < 1:
        raise ConfigInvalid(f"target_B must be >= 1, got {target_B}")
    if n < 1 or m < 1:
        raise ConfigInvalid(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    keep_lifted = (1.0 - 1.0 / (n + 1)) ** m
    if variant is MatchVariant.PER_LOO_MODEL:
        keep_train = (1.0 - 1.0 / n) ** m
        return floor_snap(target_B / (keep_lifted * keep_train))
    if variant is MatchVariant.FIXED_TOTAL:
        return floor_snap(target_B / keep_lifted)
    raise ConfigInvalid(f"unknown match variant: {variant!r}")
