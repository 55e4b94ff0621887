"""Belief-space views of the type distribution and convergence-rate measurement."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .measure import LatticeMeasure, cdf_below, compact, mean
from .wild import SolveParams, truncation_order, wild_solution

VALUE_FLOOR = 1e-12
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class RateFit:
    rate: float
    intercept: float
    r_squared: float
    times: tuple[float, ...]


@dataclass(frozen=True)
class BeliefQuery:
    b: float
    nu: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.b < 1.0 and 0.0 < self.nu < 1.0):
            raise ValueError(f"belief query needs b and nu in (0, 1), got b={self.b!r}, nu={self.nu!r}")


def off_grid(x: float, mu: LatticeMeasure) -> float:
    """Nudge x half a step down if it sits on a grid point of ``mu``."""
    r = (x - mu.origin) / mu.step
    if abs(r - round(r)) < 1e-9:
        return x - 0.5 * mu.step
    return x


def belief_threshold(q: BeliefQuery) -> float:
    """Type below which an agent's posterior of H is below b."""
    return -math.log2((1.0 - q.b) * q.nu / ((1.0 - q.nu) * q.b))


def belief_cdf(mu_t: LatticeMeasure, q: BeliefQuery) -> float:
    """Fraction of the population whose posterior of H lies in (0, b)."""
    return cdf_below(mu_t, off_grid(belief_threshold(q), mu_t))


def reflect(mu: LatticeMeasure) -> LatticeMeasure:
    """Law of -X; turns the low-world problem into a high-world one."""
    n = mu.weights.size
    return LatticeMeasure(-(mu.origin + (n - 1) * mu.step), mu.step, mu.weights[::-1], mu.deficit)


def chernoff_minimizer(y: LatticeMeasure, c: float, tol: float = 1e-10) -> tuple[float, float]:
    """Golden-section minimum of the MGF of ``y`` over (-c, 0); returns (gamma, s)."""
    if not c > 0:
        raise ValueError("c must be positive")
    if mean(y) <= 0:
        raise ValueError(f"mean {mean(y)!r} is not positive; the lower-tail bound does not apply")
    keep = y.weights > 0
    logw = np.log(y.weights[keep])
    x = y.locations[keep]

    def log_mgf(s: float) -> float:
        return float(logsumexp(logw + s * x))

    a, b = -c, 0.0
    u = b - _INV_PHI * (b - a)
    v = a + _INV_PHI * (b - a)
    fu, fv = log_mgf(u), log_mgf(v)
    while b - a > tol:
        if fu <= fv:
            b, v, fv = v, u, fu
            u = b - _INV_PHI * (b - a)
            fu = log_mgf(u)
        else:
            a, u, fu = u, v, fv
            v = a + _INV_PHI * (b - a)
            fv = log_mgf(v)
    s = 0.5 * (a + b)
    return math.exp(log_mgf(s)), s


def chernoff_gamma(y: LatticeMeasure, c: float) -> float:
    """inf over -c < s < 0 of E[exp(sY)]; below one whenever E[Y] > 0."""
    return chernoff_minimizer(y, c)[0]


def tail_truncation_order(mu0: LatticeMeasure, params: SolveParams, a: float,
                          tol: float = 1e-15) -> int:
    """Series terms needed for mu_t(-inf, a) to absolute accuracy ``tol``.

    Term n adds at most e^{-lam t} e^{-s a} gamma^{k_n} to the lower tail
    (Chernoff at the minimizing s), so the omitted terms are bounded by a
    geometric series in gamma^{m-1}.  Never exceeds the mass-based order.
    """
    full = truncation_order(params)
    if mean(mu0) <= 0:
        return full
    span = float(np.max(np.abs(mu0.locations[mu0.weights > 0])))
    gamma, s = chernoff_minimizer(compact(mu0), c=50.0 / max(span, 1e-12))
    if gamma >= 1.0:
        return full
    p = params.m - 1
    log_gamma = math.log(gamma)
    log_pre = -params.lam * params.t - s * a - math.log1p(-gamma ** p)
    # omitted <= exp(log_pre) * gamma^{p*N + 1}
    need = (math.log(tol) - log_pre - log_gamma) / (p * log_gamma)
    return int(min(full, max(1, math.ceil(need))))


def tail_solver(mu0: LatticeMeasure, lam: float, m: int, a: float,
                tol: float = 1e-15) -> Callable[[float], LatticeMeasure]:
    """t -> series solution truncated for accurate lower-tail mass below ``a``.

    The returned measures carry most of their mass as deficit at large t;
    only their left tails are meaningful.
    """
    def solve(t: float) -> LatticeMeasure:
        params = SolveParams(lam=lam, t=t, m=m)
        return wild_solution(mu0, params, n_terms=tail_truncation_order(mu0, params, a, tol))
    return solve


def tail_series(solve: Callable[[float], LatticeMeasure], a: float,
                times: Sequence[float]) -> list[tuple[float, float]]:
    """(t, mu_t(-inf, a)) for each t, with off-grid thresholds."""
    out = []
    for t in times:
        mu_t = solve(t)
        out.append((float(t), cdf_below(mu_t, off_grid(a, mu_t))))
    return out


def fit_exponential_rate(series: Sequence[tuple[float, float]]) -> RateFit:
    """Least-squares fit of log(value) against t; rate is minus the slope."""
    pts = [(t, v) for t, v in series if v > VALUE_FLOOR]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 values above {VALUE_FLOOR:g}, got {len(pts)}")
    t = np.array([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(-slope), float(intercept), r2, tuple(t.tolist()))


def lower_bound_series(mu0: LatticeMeasure, lam: float, a: float,
                       times: Sequence[float]) -> list[tuple[float, float]]:
    """e^{-lam t} mu_0(-inf, a): the first series term alone."""
    base = cdf_below(mu0, off_grid(a, mu0))
    return [(float(t), math.exp(-lam * t) * base) for t in times]

