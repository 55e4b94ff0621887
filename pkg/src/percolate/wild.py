"""Explicit Wild-sum solution of the matching dynamics.

For group size ``m`` the type distribution at time ``t`` is

    mu_t = sum_{n>=1} a_n e^{-lam t} (1 - e^{-(m-1) lam t})^{n-1} mu_0^{*k_n},
    k_n = (m-1)(n-1) + 1,

with ``a_1 = 1`` and the remaining coefficients fixed by requiring that the
(m-1)-fold convolution of the series reproduces the two-agent series at
rate ``(m-1) lam``.  For ``m = 2`` every coefficient is one.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator

import numpy as np

from . import kernels
from .measure import (LatticeMeasure, compact, convolve_power, grid_offset, trim)

log = logging.getLogger(__name__)

# powers below this are dropped from the running convolution and booked as deficit
TRIM_BELOW = 1e-300
RECURSION_MAX_N = 400
ENUMERATE_MAX_M = 6


@dataclass(frozen=True)
class WildCoefficients:
    """Series coefficients for one group size.

    ``values[n - 1]`` holds the coefficient of series term ``n``, which
    multiplies the convolution power ``k_index(n) = (m-1)(n-1) + 1``.
    Use ``coeffs[n]`` for 1-based access.
    """

    m: int
    values: np.ndarray

    def __getitem__(self, n: int) -> float:
        if n < 1:
            raise IndexError("series terms are numbered from 1")
        return float(self.values[n - 1])

    def __len__(self) -> int:
        return self.values.size

    def k_index(self, n: int) -> int:
        return (self.m - 1) * (n - 1) + 1


@dataclass(frozen=True)
class SolveParams:
    lam: float
    t: float
    m: int = 2
    epsilon: float = 1e-9
    max_terms: int = 200_000

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        if not self.t >= 0:
            raise ValueError(f"t must be nonnegative, got {self.t!r}")
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"group size m must be an integer >= 2, got {self.m!r}")
        if not (0 < self.epsilon < 1):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        object.__setattr__(self, "m", int(self.m))


def compositions(total: int, parts: int, max_part: int) -> Iterator[tuple[int, ...]]:
    """Ordered tuples of ``parts`` integers in [1, max_part] summing to ``total`` (depth-first)."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    lo = max(1, total - max_part * (parts - 1))
    hi = min(max_part, total - (parts - 1))
    for first in range(lo, hi + 1):
        for rest in compositions(total - first, parts - 1, max_part):
            yield (first,) + rest


def _restricted_sum(a: list, n: int, parts: int) -> float:
    """Sum over compositions of n+parts-1 into ``parts`` pieces, each < n, of prod a[piece].

    Memoized depth-first evaluation: level ``d`` holds, for every remaining
    total, the sum over the last ``d`` pieces.  Each level is one truncated
    convolution with the coefficient sequence.
    """
    total = n + parts - 1
    seq = np.zeros(n)
    seq[1:n] = a[1:n]  # seq[i] = a_i for pieces i = 1..n-1
    level = seq
    for _ in range(parts - 1):
        level = np.convolve(level, seq)[: total + 1]
    return float(level[total]) if total < level.size else 0.0


def _coefficients_recursion(m: int, N: int) -> np.ndarray:
    p = m - 1
    a = [0.0, 1.0]  # a[i] is the coefficient of series term i (1-based)
    for n in range(2, N + 1):
        a.append((1.0 - _restricted_sum(a, n, p)) / p)
    return np.array(a[1:])


def _coefficients_enumerate(m: int, N: int) -> np.ndarray:
    p = m - 1
    a = [0.0, 1.0]
    for n in range(2, N + 1):
        s = sum(math.prod(a[i] for i in c) for c in compositions(n + p - 1, p, n - 1))
        a.append((1.0 - s) / p)
    return np.array(a[1:])


def _coefficients_power_series(m: int, N: int) -> np.ndarray:
    # With g_j = a_{j+1}, G(y) = sum g_j y^j satisfies G^{m-1} = 1/(1-y); the
    # recursion is the coefficient-matching form of that identity, which the
    # power-of-series recurrence solves in O(N^2).
    p = m - 1
    g = np.zeros(N)
    g[0] = 1.0
    j = np.arange(N, dtype=np.float64)
    for k in range(1, N):
        s = float(np.dot((p + 1) * j[1:k] - k, g[1:k]))
        g[k] = (k - s) / (p * k)
    return g


@lru_cache(maxsize=64)
def _cached(m: int, N: int, method: str) -> np.ndarray:
    if method == "enumerate":
        out = _coefficients_enumerate(m, N)
    elif method == "recursion":
        out = _coefficients_recursion(m, N)
    elif method == "power_series":
        out = _coefficients_power_series(m, N)
    else:
        raise ValueError(f"unknown coefficient method {method!r}")
    out.setflags(write=False)
    return out


def wild_coefficients(m: int, N: int, method: str = "auto") -> WildCoefficients:
    """Coefficients of series terms 1..N for group size m.

    ``method`` is ``"enumerate"`` (literal composition enumeration, small N
    only), ``"recursion"`` (same sums, memoized), ``"power_series"`` (O(N^2))
    or ``"auto"``.
    """
    if int(m) != m or m < 2:
        raise ValueError(f"group size m must be an integer >= 2, got {m!r}")
    if int(N) != N or N < 1:
        raise ValueError(f"number of terms must be >= 1, got {N!r}")
    m, N = int(m), int(N)
    if m == 2:
        values = np.ones(N)
        values.setflags(write=False)
        return WildCoefficients(2, values)
    if method == "enumerate" and m > ENUMERATE_MAX_M:
        raise ValueError(f"composition enumeration is combinatorial in m; m={m} exceeds "
                         f"{ENUMERATE_MAX_M}, use method='recursion' or 'power_series'")
    if method == "auto":
        method = "recursion" if N <= RECURSION_MAX_N else "power_series"
    return WildCoefficients(m, _cached(m, N, method))


def wild_coefficients_exact(m: int, N: int) -> list[Fraction]:
    """The recursion in exact rational arithmetic (small m and N only)."""
    p = m - 1
    a = [Fraction(0), Fraction(1)]
    for n in range(2, N + 1):
        # level[r]: sum over tuples of the pieces placed so far totalling r
        level = {0: Fraction(1)}
        for _ in range(p):
            nxt: dict[int, Fraction] = {}
            for r, v in level.items():
                for i in range(1, n):
                    nxt[r + i] = nxt.get(r + i, Fraction(0)) + v * a[i]
            level = nxt
        a.append((1 - level.get(n + p - 1, Fraction(0))) / p)
    return a[1:]


def truncation_order(params: SolveParams) -> int:
    """Smallest N whose omitted series mass is at most epsilon.

    Bounds every coefficient by one, so the omitted mass is at most
    ``e^{-lam t} y^N / (1 - y)`` with ``y = 1 - e^{-(m-1) lam t}``.
    """
    if params.t == 0:
        return 1
    lt = params.lam * params.t
    m = params.m
    log_y = math.log1p(-math.exp(-(m - 1) * lt))
    if log_y == 0.0:
        raise OverflowError("1 - exp(-(m-1) lam t) rounds to 1; the series cannot be truncated")
    target = math.log(params.epsilon) - (m - 2) * lt  # need N * log_y <= target

    def ok(n: int) -> bool:
        return -lt + n * log_y + (m - 1) * lt <= math.log(params.epsilon) + 1e-12

    n = max(1, math.ceil(target / log_y - 1e-9))
    while n > 1 and ok(n - 1):
        n -= 1
    while not ok(n):
        n += 1
    return n


def series_weights(params: SolveParams, n_terms: int) -> tuple[np.ndarray, np.ndarray]:
    """Weights a_n e^{-lam t} y^{n-1} of terms 1..n_terms, and the convolution powers k_n."""
    m = params.m
    lt = params.lam * params.t
    n = np.arange(n_terms, dtype=np.float64)
    log_y = math.log1p(-math.exp(-(m - 1) * lt)) if lt > 0 else -math.inf
    geo = np.exp(n * log_y) if lt > 0 else (n == 0).astype(np.float64)
    w = wild_coefficients(m, n_terms).values * math.exp(-lt) * geo
    k = (m - 1) * np.arange(n_terms) + 1
    return w, k


def wild_solution(mu0: LatticeMeasure, params: SolveParams, n_terms: int | None = None,
                  backend: str | None = None) -> LatticeMeasure:
    """Type distribution at ``params.t`` from the truncated Wild series.

    The result lives on the coarsest grid through zero that carries ``mu0``
    exactly (see :func:`percolate.measure.compact`); untracked series mass is
    returned in ``deficit``.
    """
    if params.t == 0:
        return mu0
    if n_terms is None:
        n_terms = truncation_order(params)
    if n_terms > params.max_terms:
        log.warning("series needs %d terms; capping at %d and booking the rest as deficit",
                    n_terms, params.max_terms)
        n_terms = params.max_terms
    impl = kernels if backend is None else kernels.get_backend(backend)

    base = compact(mu0)
    h = base.step
    kernel = convolve_power(base, params.m - 1) if params.m > 2 else base
    w, k = series_weights(params, n_terms)
    out, lo, lost = impl.series_accumulate(
        base.weights, kernel.weights, w,
        grid_offset(base.origin, h), grid_offset(kernel.origin, h), TRIM_BELOW,
    )
    kept = math.fsum(w * (1.0 - mu0.deficit) ** k)
    deficit = max(0.0, 1.0 - kept) + lost
    return trim(LatticeMeasure(lo * h, h, out, deficit))


def convolution_identity_series(mu0: LatticeMeasure, params: SolveParams) -> LatticeMeasure:
    """Right-hand side of mu_t^{*(m-1)} = sum e^{-(m-1) lam t} y^{n-1} mu_0^{*(m-1) n}.

    This is the two-agent series at rate (m-1) lam applied to mu_0^{*(m-1)}.
    """
    p = params.m - 1
    base = convolve_power(compact(mu0), p)
    two = SolveParams(lam=p * params.lam, t=params.t, m=2, epsilon=params.epsilon,
                      max_terms=params.max_terms)
    return wild_solution(base, two)


def cf_closed_form(phi0: complex, params: SolveParams) -> complex:
    """Closed-form transform at time t; for m > 2 this is the (m-1)-th power of the transform."""
    if abs(phi0) > 1 + 1e-12:
        raise ValueError(f"|phi0| must be at most 1, got {abs(phi0)!r}")
    z = phi0 if params.m == 2 else phi0 ** (params.m - 1)
    growth = math.exp((params.m - 1) * params.lam * params.t)
    return z / (growth * (1 - z) + z)


def cf_of_measure(mu: LatticeMeasure, s: float) -> complex:
    return complex(np.sum(mu.weights * np.exp(1j * s * mu.locations)))
