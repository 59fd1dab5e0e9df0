"""Symmetric aggregation of a collection of predictions into one value.

All three aggregations are invariant to permuting their input and map the
empty collection to a configurable default (zero unless overridden), so an
ensemble whose out-of-bag set is empty still produces a prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid
from .quantiles import ceil_snap, floor_snap


@dataclass(frozen=True)
class Mean:
    empty_default: float = 0.0


@dataclass(frozen=True)
class Median:
    empty_default: float = 0.0


@dataclass(frozen=True)
class TrimmedMean:
    """Mean of the central order statistics after cutting a proportion per tail.

    For k values sorted ascending the window is positions
    ``floor(c * k) + 1 .. ceil((1 - c) * k)`` (1-indexed); with the default
    cut of 0.25 that is the middle half. For tiny k with a large cut the
    window can be empty, in which case ``empty_default`` is returned.
    """

    proportion_cut: float = 0.25
    empty_default: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.proportion_cut < 0.5):
            raise ConfigInvalid(
                f"proportion_cut must lie in [0, 0.5), got {self.proportion_cut}"
            )


AggregationSpec = Mean | Median | TrimmedMean


def aggregate(spec: AggregationSpec, predictions) -> float:
    """Apply the aggregation ``spec`` to a (possibly empty) list of predictions.

    The input is sorted before any reduction, so permutation invariance
    holds exactly in floating point, not just up to summation order.
    """
    v = np.sort(np.asarray(predictions, dtype=np.float64).ravel())
    if v.size == 0:
        return float(spec.empty_default)
    if isinstance(spec, Mean):
        return float(np.mean(v))
    if isinstance(spec, Median):
        k = v.size
        if k % 2:
            return float(v[k // 2])
        return float((v[k // 2 - 1] + v[k // 2]) / 2.0)
    if isinstance(spec, TrimmedMean):
        k = v.size
        lo = floor_snap(spec.proportion_cut * k)          # drop positions 1..lo
        hi = ceil_snap((1.0 - spec.proportion_cut) * k)   # keep through position hi
        if hi <= lo:
            return float(spec.empty_default)
        return float(np.mean(v[lo:hi]))
    raise ConfigInvalid(f"unknown aggregation spec: {spec!r}")
