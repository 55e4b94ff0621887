"""Finitely supported probability measures on uniform grids.

A :class:`LatticeMeasure` stores weights on the points ``origin + i * step``
together with an explicit ``deficit``: probability mass that some upstream
computation chose not to track (series truncation, window escape).  Weights
plus deficit always sum to one.  Nothing in this package renormalizes.

:class:`AtomicMeasure` is the exact form used before a measure is snapped to
a grid, and as a brute-force reference in tests.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import fftconvolve

log = logging.getLogger(__name__)

MASS_TOL = 1e-9
CLAMP_TOL = 1e-12
HARD_NEGATIVE = -1e-9
# products of lengths above this go through FFT convolution
FFT_THRESHOLD = 200_000


class NumericalInvariantError(ArithmeticError):
    """A computed measure violated a numerical invariant (negative mass, mass leak)."""


def exact_sum(x: np.ndarray) -> float:
    """Correctly rounded sum; zeros are skipped since grids are often sparse."""
    x = np.asarray(x, dtype=np.float64)
    return math.fsum(x[x != 0.0])


def clamp_weights(w: np.ndarray) -> np.ndarray:
    """Zero out roundoff-level negatives; raise on anything that looks like a bug."""
    w = np.asarray(w, dtype=np.float64)
    if w.size == 0:
        return w
    lo = float(w.min())
    if lo >= 0.0:
        return w
    if lo <= HARD_NEGATIVE:
        i = int(np.argmin(w))
        raise NumericalInvariantError(f"weight {lo:.3e} at index {i} is below {HARD_NEGATIVE:g}")
    if lo <= -CLAMP_TOL:
        log.warning("clamping negative weight %.3e (above hard limit %g)", lo, HARD_NEGATIVE)
    w = w.copy()
    w[w < 0.0] = 0.0
    return w


@dataclass(frozen=True)
class LatticeMeasure:
    origin: float
    step: float
    weights: np.ndarray
    deficit: float = 0.0

    def __post_init__(self):
        if not (self.step > 0.0 and math.isfinite(self.step)):
            raise ValueError(f"step must be positive and finite, got {self.step!r}")
        w = clamp_weights(np.array(self.weights, dtype=np.float64, copy=True).ravel())
        if w.size == 0:
            raise ValueError("a lattice measure needs at least one grid point")
        if not np.all(np.isfinite(w)):
            raise NumericalInvariantError("non-finite weight")
        deficit = float(self.deficit)
        if deficit < 0.0:
            if deficit < -MASS_TOL:
                raise NumericalInvariantError(f"negative deficit {deficit:.3e}")
            deficit = 0.0
        total = exact_sum(w) + deficit
        if abs(total - 1.0) > MASS_TOL:
            raise NumericalInvariantError(
                f"weights ({total - deficit:.12g}) plus deficit ({deficit:.3e}) sum to {total:.12g}, not 1"
            )
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "origin", float(self.origin))
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "deficit", deficit)

    def __len__(self) -> int:
        return self.weights.size

    @property
    def locations(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.weights.size)

    @property
    def mass(self) -> float:
        return exact_sum(self.weights)

    @classmethod
    def point(cls, x: float, step: float = 1.0) -> "LatticeMeasure":
        return cls(x, step, np.ones(1))

    @classmethod
    def from_points(cls, locations: Sequence[float], weights: Sequence[float], step: float,
                    deficit: float = 0.0) -> "LatticeMeasure":
        """Build from on-grid points (grid through zero). Off-grid points are an error."""
        loc = np.asarray(locations, dtype=np.float64)
        idx = np.rint(loc / step).astype(np.int64)
        if np.any(np.abs(idx * step - loc) > 1e-9 * max(1.0, step)):
            raise ValueError("from_points: locations are not on the grid; use snap_to_lattice")
        lo = int(idx.min())
        w = np.zeros(int(idx.max()) - lo + 1)
        np.add.at(w, idx - lo, np.asarray(weights, dtype=np.float64))
        return cls(lo * step, step, w, deficit)


@dataclass(frozen=True)
class AtomicMeasure:
    locations: np.ndarray
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        loc = np.array(self.locations, dtype=np.float64, copy=True).ravel()
        w = np.array(self.weights, dtype=np.float64, copy=True).ravel()
        if loc.shape != w.shape or loc.size == 0:
            raise ValueError("atoms need matching, nonempty location and weight arrays")
        if np.any(w < 0.0):
            raise ValueError("atom weights must be nonnegative")
        if loc.size > 1 and not np.all(np.diff(loc) > 0.0):
            raise ValueError("atom locations must be strictly increasing")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError(f"atom weights sum to {math.fsum(w)!r}, not 1")
        loc.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]], merge_tol: float = 1e-12) -> "AtomicMeasure":
        """Collect (location, weight) pairs, merging locations closer than ``merge_tol``."""
        items = sorted((float(x), float(p)) for x, p in pairs)
        locs: list[float] = []
        ws: list[float] = []
        for x, p in items:
            if locs and x - locs[-1] <= merge_tol:
                ws[-1] += p
            else:
                locs.append(x)
                ws.append(p)
        return cls(np.array(locs), np.array(ws))

    def mean(self) -> float:
        return math.fsum(self.locations * self.weights)

    def convolve(self, other: "AtomicMeasure") -> "AtomicMeasure":
        pairs = ((x + y, p * q) for x, p in zip(self.locations, self.weights)
                 for y, q in zip(other.locations, other.weights))
        return AtomicMeasure.from_pairs(pairs)

    @staticmethod
    def mixture(parts: Sequence["AtomicMeasure"], fractions: Sequence[float]) -> "AtomicMeasure":
        pairs = [(x, f * p) for part, f in zip(parts, fractions) if f > 0
                 for x, p in zip(part.locations, part.weights)]
        return AtomicMeasure.from_pairs(pairs)


def grid_offset(origin: float, step: float) -> int:
    """Integer k with origin == k * step, for origins on the grid through zero."""
    k = round(origin / step)
    if abs(k * step - origin) > 1e-6 * step:
        raise ValueError(f"origin {origin!r} is not a multiple of step {step!r}")
    return int(k)


def _raw_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.size * b.size <= FFT_THRESHOLD or min(a.size, b.size) < 64:
        return np.convolve(a, b)
    out = fftconvolve(a, b)
    out[np.abs(out) < 1e-18] = 0.0
    return clamp_weights(out)


def convolve(a: LatticeMeasure, b: LatticeMeasure) -> LatticeMeasure:
    if a.step != b.step:
        raise ValueError(f"cannot convolve measures with different steps: {a.step!r} vs {b.step!r}")
    deficit = 1.0 - (1.0 - a.deficit) * (1.0 - b.deficit)
    return LatticeMeasure(a.origin + b.origin, a.step, _raw_convolve(a.weights, b.weights), deficit)


def convolve_power(a: LatticeMeasure, k: int) -> LatticeMeasure:
    """k-fold self-convolution by repeated squaring."""
    if int(k) != k or k < 1:
        raise ValueError(f"convolution power must be a positive integer, got {k!r} "
                         "(request delta_0 explicitly for the identity)")
    k = int(k)
    result = None
    base = a
    while True:
        if k & 1:
            result = base if result is None else convolve(result, base)
        k >>= 1
        if not k:
            return result
        base = convolve(base, base)


def cdf_below(a: LatticeMeasure, x: float) -> float:
    """Mass at support points strictly less than ``x``."""
    n = int(np.searchsorted(a.locations, x, side="left"))
    return exact_sum(a.weights[:n])


def mean(a: LatticeMeasure) -> float:
    return exact_sum(a.weights * a.locations)


def _cdf_on(a: LatticeMeasure, pts: np.ndarray, tol: float) -> np.ndarray:
    c = np.concatenate(([0.0], np.cumsum(a.weights)))
    return c[np.searchsorted(a.locations, pts + tol, side="right")]


def kolmogorov_distance(a: LatticeMeasure, b: LatticeMeasure) -> float:
    """sup |F_a - F_b| over the merged support; points within 1e-9 step are identified."""
    tol = 1e-9 * min(a.step, b.step)
    pts = np.union1d(a.locations[a.weights > 0], b.locations[b.weights > 0])
    if pts.size == 0:
        return 0.0
    return min(1.0, float(np.max(np.abs(_cdf_on(a, pts, tol) - _cdf_on(b, pts, tol)))))


def snap_to_lattice(a: AtomicMeasure, step: float, origin: float = 0.0) -> LatticeMeasure:
    """Move every atom to its nearest grid point ``origin + i*step`` (ties go up)."""
    if not step > 0:
        raise ValueError("step must be positive")
    idx = np.floor((a.locations - origin) / step + 0.5).astype(np.int64)
    lo = int(idx.min())
    w = np.zeros(int(idx.max()) - lo + 1)
    np.add.at(w, idx - lo, a.weights)
    return LatticeMeasure(origin + lo * step, step, w)


def trim(a: LatticeMeasure) -> LatticeMeasure:
    nz = np.flatnonzero(a.weights)
    if nz.size == 0:
        return a
    i, j = int(nz[0]), int(nz[-1])
    if i == 0 and j == a.weights.size - 1:
        return a
    return LatticeMeasure(a.origin + i * a.step, a.step, a.weights[i:j + 1], a.deficit)


def compact(a: LatticeMeasure) -> LatticeMeasure:
    """Re-express ``a`` exactly on the coarsest grid through zero that still carries it.

    For a two-point measure at +-1.585 on a 0.001 grid this returns a measure
    with step 1.585 and three grid points; convolution powers stay exact.
    """
    off = grid_offset(a.origin, a.step)
    nz = np.flatnonzero(a.weights)
    if nz.size == 0:
        return a
    absolute = nz.astype(np.int64) + off
    g = int(np.gcd.reduce(absolute))
    if g <= 1:
        return trim(a)
    lo = int(absolute[0]) // g
    w = np.zeros(int(absolute[-1]) // g - lo + 1)
    w[absolute // g - lo] = a.weights[nz]
    step = a.step * g
    return LatticeMeasure(lo * step, step, w, a.deficit)


def refine(a: LatticeMeasure, step: float) -> LatticeMeasure:
    """Inverse of :func:`compact`: spread onto a finer grid whose step divides ``a.step``."""
    r = round(a.step / step)
    if r < 1 or abs(r * step - a.step) > 1e-9 * a.step:
        raise ValueError(f"step {step!r} does not divide {a.step!r}")
    w = np.zeros((a.weights.size - 1) * r + 1)
    w[::r] = a.weights
    return LatticeMeasure(a.origin, step, w, a.deficit)


def delta(x: float = 0.0, step: float = 0.001) -> LatticeMeasure:
    return LatticeMeasure(x, step, np.ones(1))


def to_csv(a: LatticeMeasure, dest=None) -> str:
    """Serialize as ``index,location,weight`` rows in ascending location order."""
    a = trim(a)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "location", "weight"])
    for i, (x, w) in enumerate(zip(a.locations.tolist(), a.weights.tolist())):
        writer.writerow([i, repr(x), repr(w)])
    text = buf.getvalue()
    if dest is not None:
        Path(dest).write_text(text)
    return text


def read_csv(source, step: float | None = None, deficit: float | None = None) -> LatticeMeasure:
    """Parse the CSV written by :func:`to_csv`. Missing weight mass becomes the deficit."""
    text = Path(source).read_text() if not isinstance(source, io.TextIOBase) else source.read()
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("measure CSV has no rows")
    idx = np.array([int(r["index"]) for r in rows])
    loc = np.array([float(r["location"]) for r in rows])
    w = np.array([float(r["weight"]) for r in rows])
    if step is None:
        step = (loc[-1] - loc[0]) / (idx[-1] - idx[0]) if idx[-1] != idx[0] else 1.0
    out = np.zeros(int(idx.max() - idx.min()) + 1)
    out[idx - idx.min()] = w
    if deficit is None:
        deficit = max(0.0, 1.0 - exact_sum(w))
    return LatticeMeasure(float(loc[0]), float(step), out, deficit)
