"""Bernoulli signal endowments, types, posteriors and the initial type law."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .measure import AtomicMeasure, LatticeMeasure, snap_to_lattice

HIGH = "H"
LOW = "L"


def _log_half(x: float) -> float:
    return -math.log2(x)


@dataclass(frozen=True)
class SignalSpec:
    """Likelihoods P(s=1|H) and P(s=1|L) of one binary signal."""

    p_high: float
    p_low: float

    def __post_init__(self):
        if not (0.0 < self.p_low <= self.p_high < 1.0):
            raise ValueError(
                f"signal needs 0 < p_low <= p_high < 1, got p_high={self.p_high!r}, p_low={self.p_low!r}"
            )

    @property
    def increments(self) -> tuple[float, float]:
        """Type increments for outcome 1 and outcome 0."""
        up = _log_half(self.p_low / self.p_high)
        down = _log_half((1.0 - self.p_low) / (1.0 - self.p_high))
        return up, down

    def p_one(self, world: str) -> float:
        return self.p_high if world == HIGH else self.p_low

    def expected_increment(self, world: str) -> float:
        up, down = self.increments
        p = self.p_one(world)
        return p * up + (1.0 - p) * down


@dataclass(frozen=True)
class ProfileSpec:
    fraction: float
    signals: tuple[SignalSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not (0.0 <= self.fraction <= 1.0):
            raise ValueError(f"profile fraction must lie in [0, 1], got {self.fraction!r}")
        object.__setattr__(self, "signals", tuple(self.signals))


@dataclass(frozen=True)
class WorldState:
    value: str = HIGH
    prior: float = 0.5

    def __post_init__(self):
        if self.value not in (HIGH, LOW):
            raise ValueError(f"world must be 'H' or 'L', got {self.value!r}")
        if not (0.0 < self.prior < 1.0):
            raise ValueError(f"prior must lie in (0, 1), got {self.prior!r}")

    def mirrored(self) -> "WorldState":
        return WorldState(LOW if self.value == HIGH else HIGH, self.prior)


def check_fractions(profiles: Sequence[ProfileSpec]) -> None:
    total = math.fsum(p.fraction for p in profiles)
    if not profiles or abs(total - 1.0) > 1e-12:
        raise ValueError(f"profile fractions must sum to 1, got {total!r}")


def type_from_signals(specs: Sequence[SignalSpec], outcomes: Sequence[int]) -> float:
    if len(specs) != len(outcomes):
        raise ValueError(f"{len(specs)} signal specs but {len(outcomes)} outcomes")
    theta = 0.0
    for spec, s in zip(specs, outcomes):
        up, down = spec.increments
        theta += up if s else down
    return theta


def belief_from_type(theta: float, nu: float) -> float:
    """Posterior P(X=H) of an agent of type ``theta`` under prior ``nu``."""
    if not (0.0 < nu < 1.0):
        raise ValueError(f"prior must lie in (0, 1), got {nu!r}")
    # (1/2)^theta overflows for very negative theta; go through logs
    log_odds_low = math.log((1.0 - nu) / nu) - theta * math.log(2.0)
    if log_odds_low > 700:
        return math.exp(-log_odds_low)
    return 1.0 / (1.0 + math.exp(log_odds_low))


def profile_type_law(profile: ProfileSpec, world: WorldState) -> AtomicMeasure:
    """Exact law of one agent's type, conditional on the world."""
    law = AtomicMeasure(np.zeros(1), np.ones(1))
    for spec in profile.signals:
        up, down = spec.increments
        p = spec.p_one(world.value)
        law = law.convolve(AtomicMeasure.from_pairs([(up, p), (down, 1.0 - p)]))
    return law


def initial_atomic(profiles: Sequence[ProfileSpec], world: WorldState) -> AtomicMeasure:
    check_fractions(profiles)
    parts = [profile_type_law(p, world) for p in profiles]
    return AtomicMeasure.mixture(parts, [p.fraction for p in profiles])


def initial_distribution(profiles: Sequence[ProfileSpec], world: WorldState,
                         step: float = 0.001) -> LatticeMeasure:
    """Cross-sectional type law at time zero, snapped once onto the grid through zero."""
    return snap_to_lattice(initial_atomic(profiles, world), step, 0.0)


def sample_initial_types(profile: ProfileSpec, world: WorldState, rng: np.random.Generator,
                         size: int) -> np.ndarray:
    """Vectorized draw of ``size`` independent initial types for one profile."""
    theta = np.zeros(size)
    for spec in profile.signals:
        up, down = spec.increments
        ones = rng.random(size) < spec.p_one(world.value)
        theta += np.where(ones, up, down)
    return theta


def sample_initial_type(profile: ProfileSpec, world: WorldState, rng: np.random.Generator) -> float:
    return float(sample_initial_types(profile, world, rng, 1)[0])
