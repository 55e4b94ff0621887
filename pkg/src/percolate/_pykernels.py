"""Pure-Python/numpy versions of the compiled hot loops in ``_ckernels.pyx``."""
import numpy as np


def series_accumulate(base, kernel, coeffs, base_lo, kernel_lo, trim_below):
    """Sum coeffs[n] * (base * kernel^{*n}) for n = 0..len(coeffs)-1.

    Returns (weights, lo_index, lost_mass).
    """
    base = np.asarray(base, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    N, nb, nk = coeffs.size, base.size, kernel.size
    last = N - 1
    lo = min(base_lo, base_lo + last * kernel_lo)
    hi = max(base_lo + nb - 1, base_lo + nb - 1 + last * (kernel_lo + nk - 1))
    out = np.zeros(hi - lo + 1)
    kmass = float(kernel.sum())

    p = base.copy()
    start = base_lo
    lost = 0.0
    lost_total = 0.0
    for n in range(N):
        if n > 0:
            q = np.convolve(p, kernel)
            start += kernel_lo
            lost *= kmass
            keep = np.flatnonzero(q >= trim_below)
            if keep.size == 0:
                keep = np.array([q.size - 1])
            a, b = int(keep[0]), int(keep[-1])
            lost += float(q[:a].sum() + q[b + 1:].sum())
            p = q[a:b + 1]
            start += a
        c = coeffs[n]
        lost_total += c * lost
        out[start - lo:start - lo + p.size] += c * p
    return out, lo, lost_total


def apply_meetings(types, perm, attend, draws):
    """Run meetings in order; draws[e, j] in [j, N) drives a partial Fisher-Yates shuffle."""
    m = draws.shape[1]
    for row in draws.tolist():
        for j, r in enumerate(row):
            perm[j], perm[r] = perm[r], perm[j]
        members = perm[:m].tolist()
        total = 0.0
        for i in members:
            total += types[i]
        for i in members:
            types[i] = total
            attend[i] += 1
