# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled core for the reduced-density-matrix accumulation.

Rows must be pre-sorted by env code and pre-scaled by sqrt(weight); states
sharing an env code form contiguous groups, and within a group every row
pair contributes an outer-product dot over the eigenvector axis.
"""

import numpy as np
cimport numpy as cnp


def accumulate_real(double[:, ::1] vw, long[::1] keep, long[::1] env,
                    double complex[:, ::1] out):
    cdef Py_ssize_t n_states = vw.shape[0]
    cdef Py_ssize_t n_vecs = vw.shape[1]
    cdef Py_ssize_t g0 = 0, g1, a, b, n
    cdef double acc
    while g0 < n_states:
        g1 = g0 + 1
        while g1 < n_states and env[g1] == env[g0]:
            g1 += 1
        for a in range(g0, g1):
            for b in range(g0, g1):
                acc = 0.0
                for n in range(n_vecs):
                    acc += vw[a, n] * vw[b, n]
                out[keep[a], keep[b]] += acc
        g0 = g1


def accumulate_complex(double complex[:, ::1] vw, long[::1] keep, long[::1] env,
                       double complex[:, ::1] out):
    cdef Py_ssize_t n_states = vw.shape[0]
    cdef Py_ssize_t n_vecs = vw.shape[1]
    cdef Py_ssize_t g0 = 0, g1, a, b, n
    cdef double complex acc
    while g0 < n_states:
        g1 = g0 + 1
        while g1 < n_states and env[g1] == env[g0]:
            g1 += 1
        for a in range(g0, g1):
            for b in range(g0, g1):
                acc = 0.0
                for n in range(n_vecs):
                    acc += vw[a, n] * vw[b, n].conjugate()
                out[keep[a], keep[b]] += acc
        g0 = g1
