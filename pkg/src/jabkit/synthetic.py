"""Synthetic regression data generators for desk-scale coverage studies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, RngKey, validate_dataset
from .errors import ConfigInvalid


@dataclass(frozen=True)
class LinearGaussianSpec:
    """Gaussian features, linear signal with N(0, coef_scale^2) coefficients."""

    p: int = 5
    coef_scale: float = 1.0
    noise_sd: float = 1.0

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ConfigInvalid(f"p must be >= 1, got {self.p}")
        if self.noise_sd < 0:
            raise ConfigInvalid(f"noise_sd must be >= 0, got {self.noise_sd}")


@dataclass(frozen=True)
class FriedmanSpec:
    """Nonlinear benchmark surface on uniform features (needs p >= 5).

    y = 10 sin(pi x1 x2) + 20 (x3 - 1/2)^2 + 10 x4 + 5 x5 + noise;
    any further features are pure distractors.
    """

    p: int = 10
    noise_sd: float = 1.0

    def __post_init__(self) -> None:
        if self.p < 5:
            raise ConfigInvalid(f"the nonlinear surface uses 5 features; p must be >= 5, got {self.p}")
        if self.noise_sd < 0:
            raise ConfigInvalid(f"noise_sd must be >= 0, got {self.noise_sd}")


SyntheticSpec = LinearGaussianSpec | FriedmanSpec


def generate(spec: SyntheticSpec, n: int, rng_key: RngKey) -> Dataset:
    """Draw n i.i.d. rows from the generator ``spec``."""
    if n < 1:
        raise ConfigInvalid(f"n must be >= 1, got {n}")
    rng = rng_key.generator()
    if isinstance(spec, LinearGaussianSpec):
        x = rng.standard_normal((n, spec.p))
        coefs = rng.standard_normal(spec.p) * spec.coef_scale
        y = x @ coefs
    elif isinstance(spec, FriedmanSpec):
        x = rng.random((n, spec.p))
        y = (
            10.0 * np.sin(np.pi * x[:, 0] * x[:, 1])
            + 20.0 * (x[:, 2] - 0.5) ** 2
            + 10.0 * x[:, 3]
            + 5.0 * x[:, 4]
        )
    else:
        raise ConfigInvalid(f"unknown synthetic spec: {spec!r}")
    if spec.noise_sd > 0:
        y = y + spec.noise_sd * rng.standard_normal(n)
    return validate_dataset(x, y)
