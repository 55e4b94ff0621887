import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percolate.measure import (AtomicMeasure, LatticeMeasure, NumericalInvariantError, cdf_below,
                               compact, convolve, convolve_power, kolmogorov_distance, mean,
                               read_csv, refine, snap_to_lattice, to_csv)

from .oracles import direct_convolution


def half_half(step=1.0):
    return LatticeMeasure(0.0, step, [0.5, 0.5])


def lattice(weights, origin=0.0, step=1.0):
    w = np.asarray(weights, dtype=float)
    return LatticeMeasure(origin, step, w / w.sum())


weights_st = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12).filter(lambda w: sum(w) > 1e-3)
origin_st = st.integers(-20, 20)


def test_point_masses_add():
    d = convolve(LatticeMeasure.point(1.0), LatticeMeasure.point(1.0))
    assert d.origin == 2.0 and list(d.weights) == [1.0]


def test_fair_coin_squared():
    d = convolve(half_half(), half_half())
    assert d.origin == 0.0
    np.testing.assert_allclose(d.weights, [0.25, 0.5, 0.25], atol=1e-15)


def test_step_mismatch_names_both_steps():
    with pytest.raises(ValueError, match=r"0\.5.*0\.25"):
        convolve(half_half(0.5), half_half(0.25))


@pytest.mark.parametrize("k", [1, 2, 3, 5, 8])
def test_convolve_power_of_point(k):
    assert convolve_power(LatticeMeasure.point(1.0), k).origin == float(k)


def test_convolve_power_identity_and_binomial():
    m = lattice([1, 2, 3])
    assert convolve_power(m, 1) is m
    b = convolve_power(half_half(), 4)
    np.testing.assert_allclose(b.weights, np.array([1, 4, 6, 4, 1]) / 16, atol=1e-15)


def test_convolve_power_rejects_zero():
    with pytest.raises(ValueError, match="identity"):
        convolve_power(half_half(), 0)


def test_cdf_below_is_strict():
    d0 = LatticeMeasure.point(0.0)
    assert cdf_below(d0, 0.0) == 0.0
    assert cdf_below(d0, 0.5) == 1.0
    m = LatticeMeasure(-1.0, 2.0, [0.25, 0.75])
    assert cdf_below(m, 0.5) == 0.25


def test_mean_examples():
    assert mean(LatticeMeasure.point(3.25)) == 3.25
    assert mean(LatticeMeasure(-1.0, 2.0, [0.25, 0.75])) == 0.5


def test_kolmogorov_examples():
    a = lattice([1, 2, 3])
    assert kolmogorov_distance(a, a) == 0.0
    assert kolmogorov_distance(LatticeMeasure.point(0.0), LatticeMeasure.point(1.0)) == 1.0
    assert kolmogorov_distance(LatticeMeasure.point(0.0), half_half()) == 0.5


def test_kolmogorov_across_steps_identifies_equal_points():
    fine = refine(compact(LatticeMeasure(-1.585, 0.001, np.r_[0.25, np.zeros(3169), 0.75])), 0.001)
    coarse = compact(fine)
    assert coarse.step == pytest.approx(1.585)
    assert kolmogorov_distance(fine, coarse) < 1e-15


@settings(max_examples=60, deadline=None)
@given(weights_st, weights_st, origin_st, origin_st)
def test_convolution_matches_direct_summation(wa, wb, oa, ob):
    a, b = lattice(wa, oa), lattice(wb, ob)
    c = convolve(a, b)
    ref = direct_convolution(list(a.weights), list(b.weights))
    np.testing.assert_allclose(c.weights, ref, atol=1e-12)
    assert c.origin == oa + ob
    assert math.isclose(mean(c), mean(a) + mean(b), abs_tol=1e-10)
    assert abs(c.mass - a.mass * b.mass) < 1e-12


@settings(max_examples=40, deadline=None)
@given(weights_st, weights_st, weights_st)
def test_convolution_commutes_and_associates(wa, wb, wc):
    a, b, c = lattice(wa), lattice(wb, 3), lattice(wc, -2)
    assert kolmogorov_distance(convolve(a, b), convolve(b, a)) <= 1e-12
    assert kolmogorov_distance(convolve(convolve(a, b), c), convolve(a, convolve(b, c))) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(weights_st, weights_st, weights_st, origin_st, origin_st)
def test_kolmogorov_is_a_metric(wa, wb, wc, ob, oc):
    a, b, c = lattice(wa), lattice(wb, ob), lattice(wc, oc)
    dab, dba = kolmogorov_distance(a, b), kolmogorov_distance(b, a)
    assert abs(dab - dba) <= 1e-12
    assert dab <= kolmogorov_distance(a, c) + kolmogorov_distance(c, b) + 1e-12
    assert 0.0 <= dab <= 1.0


def test_fft_path_matches_direct():
    rng = np.random.default_rng(5)
    a, b = lattice(rng.random(900)), lattice(rng.random(700), 4)
    c = convolve(a, b)
    np.testing.assert_allclose(c.weights, np.convolve(a.weights, b.weights), atol=1e-12)


def test_deficit_composes():
    a = LatticeMeasure(0.0, 1.0, [0.5, 0.4], deficit=0.1)
    b = LatticeMeasure(0.0, 1.0, [0.8], deficit=0.2)
    c = convolve(a, b)
    assert c.deficit == pytest.approx(1 - 0.9 * 0.8)
    assert c.mass + c.deficit == pytest.approx(1.0, abs=1e-12)


def test_weight_clamping_policy():
    m = LatticeMeasure(0.0, 1.0, [1.0, -5e-13])
    assert m.weights[1] == 0.0
    with pytest.raises(NumericalInvariantError):
        LatticeMeasure(0.0, 1.0, [1.0 + 1e-9, -1e-9])
    with pytest.raises(NumericalInvariantError):
        LatticeMeasure(0.0, 1.0, [0.5, 0.4])


def test_measures_are_immutable():
    m = half_half()
    with pytest.raises(ValueError):
        m.weights[0] = 1.0


def test_snap_examples():
    s = snap_to_lattice(AtomicMeasure([1.584963], [1.0]), 0.001)
    assert s.origin == pytest.approx(1.585, abs=1e-12)
    on_grid = AtomicMeasure([-0.002, 0.0, 0.003], [0.2, 0.3, 0.5])
    s = snap_to_lattice(on_grid, 0.001)
    np.testing.assert_array_equal(s.weights[s.weights > 0], [0.2, 0.3, 0.5])


def test_snap_ties_go_up():
    s = snap_to_lattice(AtomicMeasure([0.5], [1.0]), 1.0)
    assert s.origin == 1.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=10, unique=True),
       st.sampled_from([0.001, 0.01, 0.37]))
def test_snap_preserves_mass_and_moves_mean_by_half_step(xs, step):
    xs = sorted(xs)
    w = np.arange(1, len(xs) + 1, dtype=float)
    atoms = AtomicMeasure(xs, w / w.sum())
    s = snap_to_lattice(atoms, step)
    assert abs(s.mass - 1.0) <= 1e-12
    assert abs(mean(s) - atoms.mean()) <= step / 2 + 1e-9


def test_compact_and_refine_roundtrip():
    w = np.zeros(3171)
    w[0], w[-1] = 0.25, 0.75
    m = LatticeMeasure(-1.585, 0.001, w)
    c = compact(m)
    assert len(c) == 3 and c.step == pytest.approx(1.585)
    np.testing.assert_array_equal(c.weights, [0.25, 0.0, 0.75])
    r = refine(c, 0.001)
    np.testing.assert_array_equal(r.weights, w)
    assert r.origin == pytest.approx(-1.585)


def test_csv_roundtrip(tmp_path):
    m = LatticeMeasure(-1.0, 0.5, [0.125, 0.0, 0.375, 0.5])
    text = to_csv(m, tmp_path / "m.csv")
    assert text.splitlines()[0] == "index,location,weight"
    back = read_csv(tmp_path / "m.csv")
    assert back.origin == m.origin and back.step == m.step
    np.testing.assert_array_equal(back.weights, m.weights)
    assert read_csv(io.StringIO(text)).mass == pytest.approx(1.0)
