# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled jet kernels: the Leibniz convolution and the quotient solve.

Drop-in replacement for ``sprayform._jetcore_py``; built by setup.py when
Cython and a C compiler are available.
"""

import numpy as np


def mul(double[::1] a not None, double[::1] b not None, t):
    cdef int[::1] ia = t.mul_a
    cdef int[::1] ib = t.mul_b
    cdef int[::1] io = t.mul_out
    cdef double[::1] w = t.mul_w
    cdef Py_ssize_t nmon = t.nmon
    out = np.zeros(nmon)
    cdef double[::1] o = out
    cdef Py_ssize_t i, m = ia.shape[0]
    for i in range(m):
        o[io[i]] += w[i] * a[ia[i]] * b[ib[i]]
    return out


def div(double[::1] a not None, double[::1] b not None, t):
    cdef int[::1] heads = t.div_heads
    cdef int[::1] db = t.div_b
    cdef int[::1] dq = t.div_q
    cdef double[::1] dw = t.div_w
    cdef Py_ssize_t nmon = t.nmon
    out = np.empty(nmon)
    cdef double[::1] q = out
    cdef double b0 = b[0]
    cdef double acc
    cdef Py_ssize_t k, s, e, i
    for k in range(nmon):
        s = heads[k]
        e = heads[k + 1]
        acc = a[k]
        for i in range(s, e):
            acc -= dw[i] * b[db[i]] * q[dq[i]]
        q[k] = acc / b0
    return out
