# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled flooding min-sum decoder, operation-for-operation equal to the numpy one."""

import numpy as np
from libc.math cimport fabs, INFINITY


def minsum_decode_kernel(const double[::1] llr, const int[::1] var, const int[::1] rowptr,
                         double alpha, int max_iter, unsigned char[::1] hard):
    """Decode in place into ``hard``; return ``(iterations, converged)``."""
    cdef Py_ssize_t n = llr.shape[0]
    cdef Py_ssize_t n_checks = rowptr.shape[0] - 1
    cdef Py_ssize_t n_edges = var.shape[0]
    cdef double[::1] c2v = np.zeros(n_edges)
    cdef double[::1] v2c = np.empty(n_edges)
    cdef double[::1] post = np.array(llr, dtype=np.float64)
    cdef Py_ssize_t r, e, v, am
    cdef int it, par, neg, syn, ok
    cdef double x, a, min1, min2, out

    for it in range(1, max_iter + 1):
        for e in range(n_edges):
            v2c[e] = post[var[e]] - c2v[e]
        for r in range(n_checks):
            min1 = INFINITY
            min2 = INFINITY
            am = -1
            par = 0
            for e in range(rowptr[r], rowptr[r + 1]):
                x = v2c[e]
                a = fabs(x)
                if x < 0:
                    par ^= 1
                if a < min1:
                    min2 = min1
                    min1 = a
                    am = e
                elif a < min2:
                    min2 = a
            for e in range(rowptr[r], rowptr[r + 1]):
                out = alpha * (min2 if e == am else min1)
                neg = par ^ (v2c[e] < 0)
                c2v[e] = -out if neg else out
        for v in range(n):
            post[v] = 0.0
        for e in range(n_edges):
            post[var[e]] += c2v[e]
        for v in range(n):
            post[v] += llr[v]
            hard[v] = 1 if post[v] < 0 else 0
        ok = 1
        for r in range(n_checks):
            syn = 0
            for e in range(rowptr[r], rowptr[r + 1]):
                syn ^= hard[var[e]]
            if syn:
                ok = 0
                break
        if ok:
            return it, True
    return max_iter, False
