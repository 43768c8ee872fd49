"""Synthetic data: bivariate mixtures of mixtures and univariate Gaussian mixtures."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..chain_store import Dataset

SCENARIO_MEANS = {
    "A": ((25.0, 0.0), (60.0, 0.0), (0.0, 20.0), (50.0, 20.0)),
    "B": ((-10.0, -10.0), (20.0, -10.0), (-10.0, 20.0), (20.0, 20.0)),
    "C": ((-10.0, -10.0), (20.0, -10.0), (5.0, 5.0), (5.0, 25.0)),
}

# well separated five-component univariate mixture on a length-like scale
FISHERY_LIKE = {
    "means": (3.5, 5.5, 7.5, 10.0, 13.0),
    "sds": (0.3, 0.4, 0.5, 0.6, 0.8),
    "weights": (0.12, 0.45, 0.2, 0.15, 0.08),
}


@dataclass(frozen=True)
class ScenarioSpec:
    """Four-group mixture of two-component bivariate mixtures.

    Group ``g`` draws from ``N(mean_g, I)`` with probability
    ``sub_weights[0]`` and from ``N(mean_g, 200 I)`` otherwise; both
    sub-components share the group mean.
    """

    scenario: str = "B"
    n: int = 1000
    weights: tuple = (0.25, 0.25, 0.25, 0.25)
    sub_weights: tuple = (0.2, 0.8)
    sub_scales: tuple = (1.0, 200.0)
    means: tuple = field(default=None)

    def __post_init__(self):
        if self.scenario not in SCENARIO_MEANS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected A, B or C")
        if self.means is None:
            object.__setattr__(self, "means", SCENARIO_MEANS[self.scenario])
        if self.n < 1:
            raise ValueError("n must be positive")
        if not np.isclose(sum(self.weights), 1) or not np.isclose(sum(self.sub_weights), 1):
            raise ValueError("weights must sum to one")

    @property
    def G(self) -> int:
        return len(self.means)

    @property
    def mean_array(self) -> np.ndarray:
        return np.array(self.means, dtype=float)


@dataclass(frozen=True, eq=False)
class LabeledSample:
    data: Dataset
    true_labels: np.ndarray     # 1-based group of each unit
    seed: int
    true_means: np.ndarray      # (G, d)


def generate_scenario(spec: ScenarioSpec, seed: int) -> LabeledSample:
    rng = np.random.default_rng(seed)
    n = spec.n
    g = rng.choice(spec.G, size=n, p=np.asarray(spec.weights))
    s = rng.choice(len(spec.sub_weights), size=n, p=np.asarray(spec.sub_weights))
    scale = np.sqrt(np.asarray(spec.sub_scales))[s]
    y = spec.mean_array[g] + scale[:, None] * rng.standard_normal((n, 2))
    return LabeledSample(Dataset(y), g + 1, seed, spec.mean_array)


def generate_univariate(n: int, means, sds, weights, seed: int) -> LabeledSample:
    """Plain univariate Gaussian mixture sample."""
    means = np.asarray(means, dtype=float)
    sds = np.asarray(sds, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if not (means.shape == sds.shape == weights.shape):
        raise ValueError("means, sds and weights must have equal length")
    rng = np.random.default_rng(seed)
    g = rng.choice(means.size, size=n, p=weights / weights.sum())
    y = means[g] + sds[g] * rng.standard_normal(n)
    return LabeledSample(Dataset(y[:, None]), g + 1, seed, means[:, None])


def generate_fishery_like(n: int = 256, seed: int = 0) -> LabeledSample:
    return generate_univariate(n, seed=seed, **FISHERY_LIKE)
