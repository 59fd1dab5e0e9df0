"""Order-statistic quantiles with an out-of-range infinity convention.

``q_plus(v, alpha)`` is the k-th smallest element of ``v`` with
``k = ceil((1 - alpha) * (n + 1))``; when k exceeds n the quantile is +inf.
``q_minus`` is its mirror image, ``-q_plus(-v, alpha)``. These are pure
order statistics: no interpolation between sample values is ever done.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import EmptyInput, NonFiniteValue

# Products like (1 - alpha) * (n + 1) land within one ulp of an integer when
# they are an integer in exact arithmetic (alpha = 0.1, n = 9 gives
# 8.999999999999998); snap before taking ceil/floor so the index never shifts.
SNAP_TOL = 1e-9


def ceil_snap(t: float) -> int:
    """Smallest integer >= t, snapping values within SNAP_TOL of an integer."""
    r = round(t)
    if abs(t - r) <= SNAP_TOL:
        return int(r)
    return math.ceil(t)


def floor_snap(t: float) -> int:
    """Largest integer <= t, snapping values within SNAP_TOL of an integer."""
    r = round(t)
    if abs(t - r) <= SNAP_TOL:
        return int(r)
    return math.floor(t)


def quantile_index(n: int, alpha: float) -> int:
    """Order-statistic index k = ceil((1 - alpha)(n + 1)), snap-guarded.

    The result is clamped below at 1; it exceeds ``n`` exactly when the
    quantile is out of range.
    """
    k = ceil_snap((1.0 - alpha) * (n + 1))
    return max(k, 1)


def _checked(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise EmptyInput("quantile of an empty list")
    if not np.all(np.isfinite(v)):
        raise NonFiniteValue("quantile input contains NaN or infinity")
    return v


def q_plus(values, alpha: float) -> float:
    """Upper quantile: k-th smallest of ``values``, or +inf when k > n."""
    v = _checked(values)
    k = quantile_index(v.size, alpha)
    if k > v.size:
        return math.inf
    # Full sort is plenty at the list sizes seen here (n in the thousands).
    return float(np.sort(v)[k - 1])


def q_minus(values, alpha: float) -> float:
    """Lower quantile: -q_plus(-values, alpha); -inf when out of range."""
    v = _checked(values)
    return -q_plus(-v, alpha)
