"""Pure-Python (numpy) reference implementation of the stepping kernel.

Semantically identical to the compiled core in ``_speed.pyx``; used as the
import-time fallback and as the baseline in the engine benchmark. One call
runs a full trajectory of the componentwise recursion

``y <- prop * (y + h*(f0 + f_lin*y) + B(y) q + corr(y, I_m))``

for the bilinear diffusion family with weight matrix ``w`` (column j of
``B(y)`` is ``w[:, j] * y_j``), noise scales ``sqrt_eta`` and per-step raw
increments ``inc``. When ``iints`` is given (shape (M, K, K)), the
second-order correction ``corr_i = sum_j w_ij sum_r w_jr y_r I_m[r, j]`` is
added. Requires ``K <= N``.
"""

from __future__ import annotations

import numpy as np


def run_linear_trajectory(prop, f0, f_lin, w, sqrt_eta, inc, h, y0,
                          iints=None, return_path=False):
    prop = np.asarray(prop, dtype=float)
    f0 = np.asarray(f0, dtype=float)
    w = np.asarray(w, dtype=float)
    sqrt_eta = np.asarray(sqrt_eta, dtype=float)
    inc = np.asarray(inc, dtype=float)
    M, K = inc.shape
    N = prop.shape[0]
    if K > N:
        raise ValueError("kernel requires K <= N; use the generic stepper")
    y = np.array(y0, dtype=float, copy=True)
    wk = w[:K, :K]
    path = None
    if return_path:
        path = np.empty((M + 1, N))
        path[0] = y
    for m in range(M):
        q = sqrt_eta * inc[m]
        z = y + h * (f0 + f_lin * y) + w @ (y[:K] * q)
        if iints is not None:
            g = np.einsum("jr,r,rj->j", wk, y[:K], iints[m])
            z = z + w @ g
        y = prop * z
        if return_path:
            path[m + 1] = y
    return y, path
