"""Direct RK4 integration of d(mu)/dt = lam (mu^{*m} - mu) on a finite window.

This path shares nothing with the series solver beyond the lattice
representation, so the two can be checked against each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measure import (HARD_NEGATIVE, LatticeMeasure, NumericalInvariantError, clamp_weights,
                      compact, grid_offset, trim)


@dataclass(frozen=True)
class OdeParams:
    lam: float
    t: float
    m: int = 2
    dt: float = 1e-3
    window_lo: float | None = None
    window_hi: float | None = None

    def __post_init__(self):
        if not (self.lam > 0 and self.t >= 0 and self.dt > 0):
            raise ValueError("need lam > 0, t >= 0, dt > 0")
        if self.lam * self.dt > 0.01 + 1e-15:
            raise ValueError(f"lam*dt = {self.lam * self.dt:g} exceeds 0.01")
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"group size m must be an integer >= 2, got {self.m!r}")


def ancestry_bound(lam: float, t: float, m: int, tail: float = 1e-13) -> int:
    """Number K of initial types such that an agent's type at t pools more than K with mass <= tail.

    The pooled count is (m-1)(n-1)+1 where series term n carries weight at
    most e^{-lam t} y^{n-1}; the geometric tail gives K.
    """
    if t == 0:
        return 1
    lt = lam * t
    log_y = math.log1p(-math.exp(-(m - 1) * lt))
    n = max(1, math.ceil((math.log(tail) + lt - (m - 1) * lt) / log_y))
    return (m - 1) * (n - 1) + 1


def default_window(mu0: LatticeMeasure, p: OdeParams) -> tuple[float, float]:
    support = mu0.locations[mu0.weights > 0]
    k = ancestry_bound(p.lam, p.t, p.m)
    lo, hi = float(support.min()), float(support.max())
    return min(lo, k * lo, 0.0), max(hi, k * hi, 0.0)


def _power(w: np.ndarray, m: int) -> np.ndarray:
    """Full m-fold self-convolution of a weight vector."""
    size = m * (w.size - 1) + 1
    if w.size < 512:
        out = w
        for _ in range(m - 1):
            out = np.convolve(out, w)
    else:
        nfft = 1 << (size - 1).bit_length()
        out = np.fft.irfft(np.fft.rfft(w, nfft) ** m, nfft)[:size]
        out[np.abs(out) < 1e-18] = 0.0
    return out


def evolve(mu0: LatticeMeasure, p: OdeParams) -> LatticeMeasure:
    """RK4 with fixed step; mass leaving the window is carried as deficit."""
    if p.t == 0:
        return mu0
    base = compact(mu0)
    h = base.step
    lo_x, hi_x = (p.window_lo, p.window_hi)
    if lo_x is None or hi_x is None:
        d_lo, d_hi = default_window(base, p)
        lo_x = d_lo if lo_x is None else lo_x
        hi_x = d_hi if hi_x is None else hi_x
    lo = math.floor(lo_x / h + 1e-9)
    hi = math.ceil(hi_x / h - 1e-9)
    b0 = grid_offset(base.origin, h)
    if b0 < lo or b0 + base.weights.size - 1 > hi:
        raise ValueError(f"window [{lo_x}, {hi_x}] does not contain the support of mu0")
    L = hi - lo + 1
    w = np.zeros(L)
    w[b0 - lo:b0 - lo + base.weights.size] = base.weights
    m, lam = p.m, p.lam
    # index of window entry 0 inside w^{*m}: the power starts at m*lo
    shift = lo - m * lo

    def rhs(v: np.ndarray) -> tuple[np.ndarray, float]:
        full = _power(v, m)
        if shift >= 0:
            inside = full[shift:shift + L]
        else:
            inside = np.concatenate((np.zeros(-shift), full[:L + shift]))
        if inside.size < L:
            inside = np.concatenate((inside, np.zeros(L - inside.size)))
        # mass leaving the tracked population: escape, plus meetings with escaped agents
        lost = math.fsum(v) - math.fsum(inside)
        return lam * (inside - v), lam * lost

    steps = max(1, math.ceil(p.t / p.dt - 1e-9))
    dt = p.t / steps
    deficit = base.deficit
    for _ in range(steps):
        k1, e1 = rhs(w)
        k2, e2 = rhs(w + 0.5 * dt * k1)
        k3, e3 = rhs(w + 0.5 * dt * k2)
        k4, e4 = rhs(w + dt * k3)
        w = w + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        deficit += dt / 6.0 * (e1 + 2 * e2 + 2 * e3 + e4)
        if w.min() <= HARD_NEGATIVE:
            raise NumericalInvariantError(
                f"weight {w.min():.3e} during integration; reduce dt or widen the window")
    return trim(LatticeMeasure(lo * h, h, clamp_weights(w), deficit))
