# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled stepping kernel; see pyref.py for the semantic reference.

The time-step recursion is strictly sequential, and production runs take up
to 2^20 steps per sample path on short coefficient vectors, so per-step
interpreter overhead dominates a numpy formulation. This kernel runs the
whole trajectory in C. It consumes pre-drawn increments and (optionally)
pre-assembled iterated-integral matrices; all randomness stays outside.
"""

import numpy as np

cimport cython


def run_linear_trajectory(double[::1] prop, double[::1] f0, double f_lin,
                          double[:, ::1] w, double[::1] sqrt_eta,
                          double[:, ::1] inc, double h, double[::1] y0,
                          iints=None, bint return_path=False):
    cdef Py_ssize_t M = inc.shape[0]
    cdef Py_ssize_t K = inc.shape[1]
    cdef Py_ssize_t N = prop.shape[0]
    if K > N:
        raise ValueError("kernel requires K <= N; use the generic stepper")
    if w.shape[0] != N or w.shape[1] != K or f0.shape[0] != N or y0.shape[0] != N:
        raise ValueError("inconsistent kernel array shapes")

    cdef bint has_corr = iints is not None
    cdef double[:, :, ::1] iv
    if has_corr:
        iv = np.ascontiguousarray(iints, dtype=np.float64)
        if iv.shape[0] != M or iv.shape[1] != K or iv.shape[2] != K:
            raise ValueError("iterated-integral array must have shape (M, K, K)")

    y_arr = np.array(y0, dtype=np.float64, copy=True)
    path_arr = np.empty((M + 1, N), dtype=np.float64) if return_path else None

    cdef double[::1] y = y_arr
    cdef double[::1] z = np.empty(N, dtype=np.float64)
    cdef double[::1] q = np.empty(K, dtype=np.float64)
    cdef double[::1] g = np.empty(K, dtype=np.float64)
    cdef double[:, ::1] pv
    if return_path:
        pv = path_arr
        pv[0, :] = y

    cdef Py_ssize_t m, i, j, r
    cdef double acc, gj

    with nogil:
        for m in range(M):
            for j in range(K):
                q[j] = sqrt_eta[j] * inc[m, j]
            for i in range(N):
                acc = y[i] + h * (f0[i] + f_lin * y[i])
                for j in range(K):
                    acc += w[i, j] * y[j] * q[j]
                z[i] = acc
            if has_corr:
                for j in range(K):
                    gj = 0.0
                    for r in range(K):
                        gj += w[j, r] * y[r] * iv[m, r, j]
                    g[j] = gj
                for i in range(N):
                    acc = 0.0
                    for j in range(K):
                        acc += w[i, j] * g[j]
                    z[i] += acc
            for i in range(N):
                y[i] = prop[i] * z[i]
            if return_path:
                for i in range(N):
                    pv[m + 1, i] = y[i]

    return y_arr, path_arr
