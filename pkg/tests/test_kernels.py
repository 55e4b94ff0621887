import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percolate import _pykernels, kernels

compiled = pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="compiled kernels not built")


def reference_series(base, kernel, coeffs, base_lo, kernel_lo):
    """Untrimmed sum of coeffs[n] * base * kernel^{*n} by dictionary bookkeeping."""
    out = {}
    p = {base_lo + i: w for i, w in enumerate(base)}
    for n, c in enumerate(coeffs):
        if n:
            q = {}
            for i, x in p.items():
                for j, y in enumerate(kernel):
                    q[i + kernel_lo + j] = q.get(i + kernel_lo + j, 0.0) + x * y
            p = q
        for i, x in p.items():
            out[i] = out.get(i, 0.0) + c * x
    return out


@pytest.mark.parametrize("base_lo, kernel_lo", [(0, 0), (-1, -1), (3, -2)])
def test_python_series_matches_reference(base_lo, kernel_lo):
    base, kernel, coeffs = [0.25, 0.0, 0.75], [0.5, 0.5], [1.0, 0.5, 0.25, 0.125]
    out, lo, lost = _pykernels.series_accumulate(np.array(base), np.array(kernel), np.array(coeffs),
                                                 base_lo, kernel_lo, 0.0)
    ref = reference_series(base, kernel, coeffs, base_lo, kernel_lo)
    for i, x in ref.items():
        assert out[i - lo] == pytest.approx(x, abs=1e-15)
    assert lost == 0.0


def test_trimming_books_lost_mass():
    base, kernel = np.array([1.0]), np.array([0.999999, 1e-6])
    coeffs = np.ones(6)
    out, lo, lost = _pykernels.series_accumulate(base, kernel, coeffs, 0, 0, 1e-9)
    assert out.sum() + lost == pytest.approx(6.0, abs=1e-12)
    assert lost > 0


@compiled
@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.lists(st.floats(0, 1), min_size=1, max_size=5),
       st.integers(1, 12), st.integers(-5, 5), st.integers(-3, 3), st.sampled_from([0.0, 1e-12, 1e-4]))
def test_series_backends_agree(base, kernel, n, base_lo, kernel_lo, trim):
    b, k = np.array(base), np.array(kernel)
    if b.sum() == 0 or k.sum() == 0:
        return
    b, k = b / b.sum(), k / k.sum()
    coeffs = 1.0 / np.arange(1, n + 1)
    po, plo, plost = _pykernels.series_accumulate(b, k, coeffs, base_lo, kernel_lo, trim)
    co, clo, clost = kernels.BACKENDS["compiled"].series_accumulate(b, k, coeffs, base_lo, kernel_lo, trim)
    assert plo == clo and po.size == co.size
    np.testing.assert_allclose(po, co, rtol=1e-12, atol=1e-15)
    assert plost == pytest.approx(clost, abs=1e-14)


@compiled
@pytest.mark.parametrize("m", [2, 3, 7])
def test_meetings_backends_bit_identical(m):
    rng = np.random.default_rng(m)
    n = 500
    draws = rng.integers(np.arange(m), n, size=(3000, m), dtype=np.int64)
    start = rng.normal(size=n)
    results = []
    for impl in (_pykernels, kernels.BACKENDS["compiled"]):
        types, perm, attend = start.copy(), np.arange(n, dtype=np.int64), np.zeros(n, dtype=np.int64)
        impl.apply_meetings(types, perm, attend, draws)
        results.append((types, perm, attend))
    for a, b in zip(*results):
        np.testing.assert_array_equal(a, b)


def test_meeting_pools_types():
    types = np.array([1.0, 2.0, 4.0, 8.0])
    perm = np.arange(4, dtype=np.int64)
    attend = np.zeros(4, dtype=np.int64)
    _pykernels.apply_meetings(types, perm, attend, np.array([[2, 3]], dtype=np.int64))
    # swap 0<->2, then 1<->3: members are agents 2 and 3
    np.testing.assert_array_equal(types, [1.0, 2.0, 12.0, 12.0])
    np.testing.assert_array_equal(attend, [0, 0, 1, 1])


def test_backend_env_override():
    code = "from percolate import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"PERCOLATE_BACKEND": "python", "PATH": ""}, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ImportError):
        kernels.get_backend("gpu")
