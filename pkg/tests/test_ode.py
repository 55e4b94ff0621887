import math

import numpy as np
import pytest

from percolate.measure import LatticeMeasure, kolmogorov_distance, mean
from percolate.ode import OdeParams, ancestry_bound, default_window, evolve
from percolate.signals import ProfileSpec, SignalSpec, WorldState, initial_distribution
from percolate.wild import SolveParams, wild_solution

from .oracles import point_mass_wild

MU0 = initial_distribution((ProfileSpec(1.0, (SignalSpec(0.75, 0.25),)),), WorldState("H"))


def test_t0_is_identity():
    assert evolve(MU0, OdeParams(1.0, 0.0)) is MU0


@pytest.mark.parametrize("m", [2, 3, 5])
def test_zero_is_fixed_point(m):
    r = evolve(LatticeMeasure.point(0.0), OdeParams(1.0, 1.0, m, window_lo=-2, window_hi=2))
    assert r.origin == 0.0 and r.weights[0] == pytest.approx(1.0, abs=1e-14)


def test_point_mass_matches_geometric_law():
    r = evolve(LatticeMeasure.point(1.0), OdeParams(1.0, 1.0, 2))
    n = np.rint(r.locations).astype(int)
    ref = point_mass_wild(int(n[-1]), 1.0, 1.0)[n - 1]
    np.testing.assert_allclose(r.weights, ref, atol=1e-5)
    assert r.weights[0] == pytest.approx(math.exp(-1), abs=1e-5)


@pytest.mark.parametrize("m", [2, 3])
def test_mass_is_conserved_with_deficit(m):
    r = evolve(MU0, OdeParams(1.0, 1.0, m, dt=0.005))
    assert abs(r.mass + r.deficit - 1) <= 1e-9


def test_narrow_window_books_escape_as_deficit():
    r = evolve(MU0, OdeParams(1.0, 1.0, 2, dt=0.005, window_lo=-4, window_hi=4))
    assert r.deficit > 1e-3
    assert abs(r.mass + r.deficit - 1) <= 1e-9


@pytest.mark.parametrize("m", [2, 3])
def test_mean_growth(m):
    r = evolve(MU0, OdeParams(1.0, 0.8, m, dt=0.005))
    target = mean(MU0) * math.exp((m - 1) * 0.8)
    assert abs(mean(r) - target) / target <= 1e-5


@pytest.mark.parametrize("m, t", [(2, 0.5), (3, 0.5)])
def test_agrees_with_series(m, t):
    w = wild_solution(MU0, SolveParams(1.0, t, m))
    o = evolve(MU0, OdeParams(1.0, t, m, dt=0.005))
    assert kolmogorov_distance(w, o) <= 1e-6


def test_fourth_order_convergence():
    exact = wild_solution(MU0, SolveParams(1.0, 1.0, 2, epsilon=1e-15))
    e1 = kolmogorov_distance(evolve(MU0, OdeParams(1.0, 1.0, 2, dt=0.01)), exact)
    e2 = kolmogorov_distance(evolve(MU0, OdeParams(1.0, 1.0, 2, dt=0.005)), exact)
    assert 8 <= e1 / e2 <= 32


def test_window_must_contain_support():
    with pytest.raises(ValueError, match="window"):
        evolve(MU0, OdeParams(1.0, 1.0, window_lo=0.0, window_hi=5.0))


@pytest.mark.parametrize("lam, dt", [(1.0, 0.02), (5.0, 0.003)])
def test_step_size_check(lam, dt):
    with pytest.raises(ValueError, match="exceeds"):
        OdeParams(lam, 1.0, dt=dt)


def test_default_window_covers_ancestry():
    p = OdeParams(1.0, 2.0, 3)
    k = ancestry_bound(1.0, 2.0, 3)
    lo, hi = default_window(MU0, p)
    assert k > 1
    assert lo <= -k * 1.58 and hi >= k * 1.58
