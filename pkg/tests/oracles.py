"""Reference computations that share no code path with the package."""
import itertools
import math
from fractions import Fraction

import numpy as np


def central_binomial_ratio(k: int) -> Fraction:
    """C(2k, k) / 4^k."""
    return Fraction(math.comb(2 * k, k), 4 ** k)


def binomial_series_coeffs(m: int, N: int) -> np.ndarray:
    """Taylor coefficients of (1 - y)^{-1/(m-1)}, via log-gamma ratios."""
    p = m - 1
    k = np.arange(N)
    log_c = (np.array([math.lgamma(j + 1.0 / p) for j in k]) - math.lgamma(1.0 / p)
             - np.array([math.lgamma(j + 1.0) for j in k]))
    return np.exp(log_c)


def point_mass_wild(n_max: int, lam: float, t: float) -> np.ndarray:
    """Weights at n = 1..n_max of the two-agent solution started from a unit point mass at 1."""
    q = math.exp(-lam * t)
    return np.array([q * (1 - q) ** (n - 1) for n in range(1, n_max + 1)])


def enumerate_sum_tail(xs, ps, n: int, a: float) -> float:
    """P(Y_1 + ... + Y_n <= a) by brute force over all outcome tuples."""
    total = 0.0
    for combo in itertools.product(range(len(xs)), repeat=n):
        if sum(xs[i] for i in combo) <= a + 1e-12:
            total += math.prod(ps[i] for i in combo)
    return total


def direct_convolution(a, b):
    out = [0.0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def cdf_at(locs, weights, x):
    return sum(w for l, w in zip(locs, weights) if l <= x + 1e-12)
