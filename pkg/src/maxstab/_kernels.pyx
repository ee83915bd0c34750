# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops of the two Poisson-series samplers.

Both functions mirror ``_kernels_py`` operation by operation so that the two
backends produce bit-identical output on the same inputs.
"""

from libc.math cimport INFINITY


def ts_advance(double[::1] z, long long[::1] owner, long long base,
               const double[:, ::1] v, const double[::1] incr,
               double gamma, double tau, double[::1] g_out,
               unsigned char[::1] changed_out):
    """Feed rows of ``v`` into the running maximum until the stopping rule fires.

    ``owner[i]`` receives ``base + b`` whenever row ``b`` sets site ``i``.
    Returns ``(consumed, gamma, stopped)``.
    """
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t nrows = v.shape[0]
    cdef Py_ssize_t b, i
    cdef double val, m
    cdef unsigned char ch
    for b in range(nrows):
        ch = 0
        m = INFINITY
        for i in range(n):
            val = v[b, i] / gamma
            if val > z[i]:
                z[i] = val
                owner[i] = base + b
                ch = 1
            if z[i] < m:
                m = z[i]
        gamma = gamma + incr[b]
        g_out[b] = gamma * m
        changed_out[b] = ch
        if tau / gamma < m:
            return b + 1, gamma, True
    return nrows, gamma, False


def ef_advance(double[::1] z, const double[:, ::1] v, const double[::1] incr,
               double gamma, Py_ssize_t pos):
    """Run the inner loop of the extremal-functions sampler at site ``pos``.

    Sites are in visiting order, so "earlier sites" is the prefix ``[0, pos)``.
    Returns ``(rows_used, incr_used, gamma, status)`` with status 0 when the
    rows ran out, 1 on acceptance and 2 when the loop condition failed.
    """
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t nrows = v.shape[0]
    cdef Py_ssize_t b, k
    cdef double val
    cdef bint ok
    for b in range(nrows):
        if 1.0 / gamma < z[pos]:
            return b, b, gamma, 2
        ok = True
        for k in range(pos):
            if not (v[b, k] / gamma < z[k]):
                ok = False
                break
        if ok:
            for k in range(pos, n):
                val = v[b, k] / gamma
                if val > z[k]:
                    z[k] = val
            return b + 1, b, gamma, 1
        gamma = gamma + incr[b]
    return nrows, nrows, gamma, 0
