"""Finite-population Monte Carlo of random group meetings.

N agents; meetings arrive as one Poisson stream of rate N*lam/m, each one
drawing m distinct agents uniformly and giving all of them the sum of their
types.  Every agent therefore attends meetings at rate lam whatever m is.

Random numbers come from a Philox counter-based generator keyed by
``seed`` (low 64 bits) and ``stream`` (high 64 bits), so replications of one
configuration differ only in their stream index.  Draw order: initial
signal outcomes profile by profile, then alternating chunks of inter-meeting
gaps and member selections.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .measure import LatticeMeasure
from .signals import ProfileSpec, WorldState, check_fractions, sample_initial_types

CHUNK = 1 << 15
# dense snapshots wider than this are refused rather than allocated
MAX_GRID_POINTS = 50_000_000


@dataclass(frozen=True)
class SimConfig:
    n_agents: int
    lam: float
    m: int
    horizon: float
    world: WorldState
    profiles: tuple[ProfileSpec, ...]
    snapshot_times: tuple[float, ...] = ()
    seed: int = 0
    stream: int = 0
    step: float = 0.001

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        times = tuple(float(t) for t in (self.snapshot_times or (self.horizon,)))
        object.__setattr__(self, "snapshot_times", times)
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"group size m must be an integer >= 2, got {self.m!r}")
        if self.n_agents < self.m:
            raise ValueError(f"need at least m={self.m} agents, got {self.n_agents}")
        if not (self.lam > 0 and self.horizon >= 0 and self.step > 0):
            raise ValueError("need lam > 0, horizon >= 0, step > 0")
        if list(times) != sorted(times) or times[0] < 0 or times[-1] > self.horizon:
            raise ValueError("snapshot times must be sorted and lie in [0, horizon]")
        check_fractions(self.profiles)
        positive = [p.fraction for p in self.profiles if p.fraction > 0]
        if self.n_agents * min(positive) < 1:
            raise ValueError("every profile with positive fraction needs at least one agent")
        if not (0 <= self.seed < 2**64 and 0 <= self.stream < 2**64):
            raise ValueError("seed and stream must be unsigned 64-bit integers")


@dataclass
class SimResult:
    snapshots: dict[float, LatticeMeasure]
    meeting_count: int
    attendance: float
    seed: int
    stream: int
    agent_meetings: np.ndarray = field(repr=False)
    final_types: np.ndarray = field(repr=False)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(stream << 64) | seed))


def allocate_profiles(fractions: Sequence[float], n: int) -> np.ndarray:
    """Agent counts per profile by largest remainder; ties go to the earlier profile."""
    raw = np.asarray(fractions, dtype=np.float64) * n
    counts = np.floor(raw).astype(np.int64)
    short = n - int(counts.sum())
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def empirical_measure(types, step: float = 0.001) -> LatticeMeasure:
    x = np.asarray(types, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empirical measure of an empty population")
    idx = np.floor(x / step + 0.5).astype(np.int64)
    lo = int(idx.min())
    span = int(idx.max()) - lo + 1
    if span > MAX_GRID_POINTS:
        raise ValueError(f"types span {span} grid points at step {step:g} "
                         f"(limit {MAX_GRID_POINTS}); use a coarser step")
    counts = np.bincount(idx - lo)
    return LatticeMeasure(lo * step, step, counts / x.size)


def initial_types(config: SimConfig, rng: np.random.Generator) -> np.ndarray:
    counts = allocate_profiles([p.fraction for p in config.profiles], config.n_agents)
    parts = [sample_initial_types(p, config.world, rng, int(c))
             for p, c in zip(config.profiles, counts)]
    return np.concatenate(parts)


def run(config: SimConfig, backend: str | None = None) -> SimResult:
    impl = kernels if backend is None else kernels.get_backend(backend)
    rng = make_rng(config.seed, config.stream)
    n, m = config.n_agents, config.m
    types = initial_types(config, rng)
    perm = np.arange(n, dtype=np.int64)
    attend = np.zeros(n, dtype=np.int64)
    scale = m / (n * config.lam)  # mean gap between meetings
    low = np.arange(m, dtype=np.int64)

    wanted = set(config.snapshot_times)
    pending = sorted(wanted | {config.horizon})
    snapshots: dict[float, LatticeMeasure] = {}
    clock = 0.0
    count = 0
    while pending:
        gaps = rng.exponential(scale, size=CHUNK)
        draws = rng.integers(low, n, size=(CHUNK, m), dtype=np.int64)
        times = clock + np.cumsum(gaps)
        start = 0
        while pending:
            s = pending[0]
            stop = int(np.searchsorted(times, s, side="right"))
            if stop == CHUNK:
                break
            impl.apply_meetings(types, perm, attend, draws[start:stop])
            count += stop - start
            start = stop
            if s in wanted:
                snapshots[s] = empirical_measure(types, config.step)
            pending.pop(0)
        if pending:
            impl.apply_meetings(types, perm, attend, draws[start:])
            count += CHUNK - start
            clock = float(times[-1])

    horizon = config.horizon
    attendance = m * count / (n * horizon) if horizon > 0 else 0.0
    return SimResult(snapshots, count, attendance, config.seed, config.stream, attend, types)
