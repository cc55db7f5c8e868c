# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled treeplex kernels: the per-decision-point recursions that dominate
solver runtime.  Semantics match _kernels_py exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

BACKEND = "cython"


def tree_conjugate_entropy(double[::1] g_in, double[::1] dp_weight,
                           long[::1] seq_start, long[::1] n_actions,
                           long[::1] parent_seq):
    cdef Py_ssize_t n_seqs = g_in.shape[0]
    cdef Py_ssize_t n_dp = seq_start.shape[0]
    g_arr = np.array(g_in, dtype=np.float64, copy=True)
    z_arr = np.ones(n_seqs, dtype=np.float64)
    cdef double[::1] g = g_arr
    cdef double[::1] z = z_arr
    cdef Py_ssize_t j, i, s, n
    cdef double w, m, acc, lse, gh
    for j in range(n_dp - 1, -1, -1):
        s = seq_start[j]
        n = n_actions[j]
        w = dp_weight[j]
        m = g[s] / w
        for i in range(1, n):
            gh = g[s + i] / w
            if gh > m:
                m = gh
        acc = 0.0
        for i in range(n):
            acc += exp(g[s + i] / w - m)
        lse = m + log(acc)
        for i in range(n):
            z[s + i] = exp(g[s + i] / w - lse)
        g[parent_seq[j]] += w * (lse - log(<double> n))
    for j in range(n_dp):
        s = seq_start[j]
        n = n_actions[j]
        w = z[parent_seq[j]]
        for i in range(n):
            z[s + i] *= w
    return z_arr, float(g[0])


def tree_linear_max(double[::1] g_in, long[::1] seq_start,
                    long[::1] n_actions, long[::1] parent_seq):
    cdef Py_ssize_t n_seqs = g_in.shape[0]
    cdef Py_ssize_t n_dp = seq_start.shape[0]
    v_arr = np.array(g_in, dtype=np.float64, copy=True)
    cdef double[::1] v = v_arr
    choice_arr = np.zeros(n_dp, dtype=np.int64)
    cdef long[::1] choice = choice_arr
    cdef Py_ssize_t j, i, s, n, best
    cdef double bv
    for j in range(n_dp - 1, -1, -1):
        s = seq_start[j]
        n = n_actions[j]
        best = 0
        bv = v[s]
        for i in range(1, n):
            if v[s + i] > bv:
                bv = v[s + i]
                best = i
        choice[j] = best
        v[parent_seq[j]] += bv
    x_arr = np.zeros(n_seqs, dtype=np.float64)
    cdef double[::1] x = x_arr
    x[0] = 1.0
    for j in range(n_dp):
        x[seq_start[j] + choice[j]] = x[parent_seq[j]]
    return x_arr, float(v[0])
