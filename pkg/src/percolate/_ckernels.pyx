# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Semantics must match percolate._pykernels exactly."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def series_accumulate(const double[::1] base, const double[::1] kernel,
                      const double[::1] coeffs, Py_ssize_t base_lo, Py_ssize_t kernel_lo,
                      double trim_below):
    """Sum coeffs[n] * (base * kernel^{*n}) for n = 0..len(coeffs)-1.

    Returns (weights, lo_index, lost_mass).
    """
    cdef Py_ssize_t N = coeffs.shape[0]
    cdef Py_ssize_t nb = base.shape[0], nk = kernel.shape[0]
    cdef Py_ssize_t last = N - 1
    cdef Py_ssize_t lo = min(base_lo, base_lo + last * kernel_lo)
    cdef Py_ssize_t hi = max(base_lo + nb - 1, base_lo + nb - 1 + last * (kernel_lo + nk - 1))
    out_arr = np.zeros(hi - lo + 1)
    cdef double[::1] out = out_arr

    kidx_arr = np.flatnonzero(np.asarray(kernel)).astype(np.intp)
    cdef Py_ssize_t[::1] kidx = kidx_arr
    cdef Py_ssize_t nkz = kidx.shape[0]
    cdef double kmass = 0.0
    cdef Py_ssize_t i, j, n, a, b, plen, qlen
    for i in range(nk):
        kmass += kernel[i]

    cdef Py_ssize_t cap = nb + last * (nk - 1) + 1
    p_arr = np.zeros(cap)
    q_arr = np.zeros(cap)
    cdef double[::1] p = p_arr
    cdef double[::1] q = q_arr
    cdef double[::1] tmp
    cdef double c, v, s, lost = 0.0, lost_total = 0.0
    cdef Py_ssize_t start = base_lo

    for i in range(nb):
        p[i] = base[i]
    plen = nb
    for n in range(N):
        if n > 0:
            qlen = plen + nk - 1
            for i in range(qlen):
                q[i] = 0.0
            for i in range(plen):
                v = p[i]
                if v == 0.0:
                    continue
                for j in range(nkz):
                    q[i + kidx[j]] += v * kernel[kidx[j]]
            start += kernel_lo
            lost *= kmass
            # trim negligible ends
            a = 0
            s = 0.0
            while a < qlen - 1 and q[a] < trim_below:
                s += q[a]
                a += 1
            b = qlen - 1
            while b > a and q[b] < trim_below:
                s += q[b]
                b -= 1
            lost += s
            plen = b - a + 1
            if a > 0:
                for i in range(plen):
                    q[i] = q[i + a]
            start += a
            tmp = p
            p = q
            q = tmp
        c = coeffs[n]
        lost_total += c * lost
        for i in range(plen):
            out[start - lo + i] += c * p[i]
    return out_arr, lo, lost_total


def apply_meetings(double[::1] types, cnp.int64_t[::1] perm, cnp.int64_t[::1] attend,
                   const cnp.int64_t[:, ::1] draws):
    """Run meetings in order; draws[e, j] in [j, N) drives a partial Fisher-Yates shuffle."""
    cdef Py_ssize_t n_events = draws.shape[0], m = draws.shape[1]
    cdef Py_ssize_t e, j, r
    cdef cnp.int64_t t
    cdef double total
    for e in range(n_events):
        for j in range(m):
            r = draws[e, j]
            t = perm[j]
            perm[j] = perm[r]
            perm[r] = t
        total = 0.0
        for j in range(m):
            total += types[perm[j]]
        for j in range(m):
            types[perm[j]] = total
            attend[perm[j]] += 1
