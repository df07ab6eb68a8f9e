"""Approximation of scaled iterated stochastic integrals over one time step.

For scalar Brownian motions ``beta_i`` with increments ``b_i`` over a step of
size ``h``, the doubly stochastic integral decomposes into an explicit
symmetric part and the Levy area: ``I_(i,j) = (b_i b_j - delta_ij h)/2 + A_ij``
with ``A`` antisymmetric. Two approximation engines are provided.

* ``ALG1`` truncates the classical trigonometric (Karhunen-Loeve) series of
  the Levy area after D terms. Per step it consumes exactly ``2*K*D``
  standard normals and its root-mean-square truncation error decays like
  ``D^{-1/2}``.
* ``ALG2`` adds to the truncated series an antisymmetric Gaussian tail whose
  covariance, conditional on the increments, matches the discarded remainder
  exactly. It consumes ``K*(K-1)/2`` extra normals. The substituted tail
  reproduces the remainder in distribution (the total conditional second
  moments are exact), which is what higher-order schemes consume.

A brute-force left-point Riemann oracle on a subdivided step validates both
engines, and ``choose_D`` implements the truncation-depth selection rules
that keep a Milstein-type scheme at its full temporal order.

All entries are scaled by ``sqrt(eta_i eta_j)`` for a trace-class covariance
spectrum, i.e. the returned matrices are the iterated-integral coefficients
of a projected Q-Wiener process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalDegeneracyError
from .noise import INCREMENTS, SERIES, TAIL, QSpectrum, derive_stream

__all__ = [
    "IterIntBatch",
    "alg1_batch",
    "alg2_batch",
    "oracle_batch",
    "choose_D",
    "measure_rmse",
    "tail_sum_scale",
    "pair_indices",
    "tail_covariance",
    "tail_root",
    "tail_from_normals",
    "levy_series",
    "sample_unconditional",
]

_ZETA2 = np.pi**2 / 6.0


@dataclass(frozen=True)
class IterIntBatch:
    """One step's K x K matrix of approximated scaled iterated integrals.

    Entry ``(i, j)`` approximates the integral of coordinate i against
    coordinate j; ``algorithm`` records the producing engine and ``D`` the
    series truncation depth (0 for the oracle).
    """

    values: np.ndarray
    h: float
    D: int
    algorithm: str


def levy_series(u: np.ndarray, v: np.ndarray, delta_beta: np.ndarray, h: float) -> np.ndarray:
    """Truncated Levy-area series ``A^(D)`` from standard normal tables.

    ``u, v`` have shape (..., D, K) and ``delta_beta`` shape (..., K); the
    result is the antisymmetric (..., K, K) array

    ``A_ij = h/(2 pi) * sum_r (1/r) [u_ri (v_rj + sqrt(2/h) b_j)
                                     - u_rj (v_ri + sqrt(2/h) b_i)]``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    b = np.asarray(delta_beta, dtype=float)
    depth = u.shape[-2]
    r = np.arange(1.0, depth + 1.0)
    vc = v + np.sqrt(2.0 / h) * b[..., None, :]
    uw = u / r[:, None]
    m = np.swapaxes(uw, -1, -2) @ vc
    return (h / (2.0 * np.pi)) * (m - np.swapaxes(m, -1, -2))


def tail_sum_scale(h: float, D: int) -> float:
    """Remainder weight ``a_D = h^2/(2 pi^2) * sum_{r>D} r^-2``.

    Evaluated through the closed form ``pi^2/6 - sum_{r<=D} r^-2`` with
    compensated summation; never truncates the infinite tail numerically.
    """
    if D < 0:
        raise ValueError("truncation depth must be nonnegative")
    partial = math.fsum(1.0 / (r * r) for r in range(1, D + 1))
    return (h * h) / (2.0 * np.pi**2) * max(_ZETA2 - partial, 0.0)


def pair_indices(K: int):
    """Row-major strictly-lower-triangular pair order ``(i, j), i > j`` (0-based)."""
    ii, jj = np.tril_indices(K, k=-1)
    return ii, jj


def tail_covariance(delta_beta: np.ndarray, h: float, a_d: float) -> np.ndarray:
    """Conditional covariance of the Gaussian tail on the pair space.

    For pairs p=(i,j), p'=(k,l) with i>j, k>l the entry is

    ``a_D [d_ik d_jl - d_il d_jk + (d_ik b_j b_l + d_jl b_i b_k
           - d_il b_j b_k - d_jk b_i b_l)/h]``.
    """
    b = np.asarray(delta_beta, dtype=float)
    k = b.shape[0]
    ii, jj = pair_indices(k)
    di = (ii[:, None] == ii[None, :]).astype(float)
    dj = (jj[:, None] == jj[None, :]).astype(float)
    dx = (ii[:, None] == jj[None, :]).astype(float)
    dy = (jj[:, None] == ii[None, :]).astype(float)
    cov = di * dj - dx * dy + (
        di * np.outer(b[jj], b[jj])
        + dj * np.outer(b[ii], b[ii])
        - dx * np.outer(b[jj], b[ii])
        - dy * np.outer(b[ii], b[jj])
    ) / h
    return a_d * cov


def tail_root(cov: np.ndarray, clamp_tol: float = 1e-12) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in ``[-clamp_tol * scale, 0)`` are clamped to zero; anything
    more negative raises :class:`NumericalDegeneracyError` with the matrix
    attached.
    """
    vals, vecs = np.linalg.eigh(cov)
    scale = max(float(vals[-1]), 1.0e-300)
    if vals[0] < -clamp_tol * scale:
        raise NumericalDegeneracyError(
            f"tail covariance is not PSD within tolerance (min eig {vals[0]:.3e})", matrix=cov
        )
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def tail_from_normals(delta_beta: np.ndarray, h: float, a_d: float, z: np.ndarray) -> np.ndarray:
    """Closed-form application of the symmetric root to standard normals.

    On antisymmetric matrices the covariance operator is
    ``a_D (Id + S_b / h)`` with ``S_b X = b b^T X + X b b^T``; ``S_b`` has
    eigenvalue ``|b|^2`` on the subspace spanned by ``b`` and 0 on its
    complement, so the unique symmetric root acts as

    ``tau = sqrt(a_D) (Z + kappa (b b^T Z + Z b b^T))``,
    ``kappa = 1 / (h (1 + sqrt(1 + |b|^2/h)))``.

    ``delta_beta`` broadcasts over leading batch axes; ``z`` holds the
    ``K(K-1)/2`` pair normals in row-major lower-triangular order. Returns
    the antisymmetric (..., K, K) tail matrix. Agrees with
    ``tail_root(tail_covariance(...)) @ z`` to floating-point accuracy.
    """
    b = np.asarray(delta_beta, dtype=float)
    z = np.asarray(z, dtype=float)
    k = b.shape[-1]
    ii, jj = pair_indices(k)
    zmat = np.zeros(z.shape[:-1] + (k, k))
    zmat[..., ii, jj] = z
    zmat[..., jj, ii] = -z
    nb2 = np.sum(b * b, axis=-1, keepdims=True)[..., None]
    kappa = 1.0 / (h * (1.0 + np.sqrt(1.0 + nb2 / h)))
    bbz = b[..., :, None] * np.sum(b[..., :, None] * zmat, axis=-2)[..., None, :]
    tau = zmat + kappa * (bbz - np.swapaxes(bbz, -1, -2))
    return np.sqrt(a_d) * tau


def _eta_scale(spectrum: QSpectrum, K: int) -> np.ndarray:
    eta = spectrum.etas(K)
    if np.any(eta == 0.0):
        raise ValueError("eta_j must be nonzero for every retained noise mode")
    s = np.sqrt(eta)
    return np.outer(s, s)


def _symmetric_part(delta_beta: np.ndarray, h: float) -> np.ndarray:
    b = np.asarray(delta_beta, dtype=float)
    k = b.shape[-1]
    return 0.5 * (b[..., :, None] * b[..., None, :] - h * np.eye(k))


def alg1_batch(delta_beta, h, D, spectrum, rng) -> IterIntBatch:
    """Truncated-series batch; consumes exactly ``2*K*D`` normals from ``rng``.

    Draw order is one C-contiguous ``(D, 2, K)`` block, so a deeper
    truncation from the same stream extends a shallower one term by term.
    """
    if D < 1:
        raise ValueError(f"series depth D must be >= 1, got {D}")
    if h <= 0.0:
        raise ValueError(f"step h must be positive, got {h}")
    b = np.asarray(delta_beta, dtype=float)
    k = b.shape[0]
    draws = rng.standard_normal((D, 2, k))
    area = levy_series(draws[:, 0, :], draws[:, 1, :], b, h)
    values = _eta_scale(spectrum, k) * (_symmetric_part(b, h) + area)
    return IterIntBatch(values=values, h=h, D=D, algorithm="ALG1")


def alg2_batch(delta_beta, h, D, spectrum, rng, tail_rng=None) -> IterIntBatch:
    """Series plus Gaussian tail; consumes ``2*K*D + K*(K-1)/2`` normals.

    The ``K*(K-1)/2`` tail normals come from ``tail_rng`` (falling back to
    ``rng`` when not given) and are mapped through the eigendecomposition
    square root of the conditional tail covariance. For K=1 the tail is
    empty and the result coincides with :func:`alg1_batch`.
    """
    if D < 1:
        raise ValueError(f"series depth D must be >= 1, got {D}")
    if h <= 0.0:
        raise ValueError(f"step h must be positive, got {h}")
    b = np.asarray(delta_beta, dtype=float)
    k = b.shape[0]
    draws = rng.standard_normal((D, 2, k))
    area = levy_series(draws[:, 0, :], draws[:, 1, :], b, h)
    if k >= 2:
        z = (tail_rng if tail_rng is not None else rng).standard_normal(k * (k - 1) // 2)
        a_d = tail_sum_scale(h, D)
        tau = tail_root(tail_covariance(b, h, a_d)) @ z
        ii, jj = pair_indices(k)
        area = area.copy()
        area[ii, jj] += tau
        area[jj, ii] -= tau
    values = _eta_scale(spectrum, k) * (_symmetric_part(b, h) + area)
    return IterIntBatch(values=values, h=h, D=D, algorithm="ALG2")


def oracle_batch(fine_increments, h, spectrum) -> IterIntBatch:
    """Left-point Riemann approximation on an S-subdivided step.

    ``fine_increments`` has shape (..., S, K) with column sums equal to the
    step increments. Entry (i, j) is ``sum_{s=2}^S B^i_{s-1} d^j_s`` with
    ``B`` the running partial sums; the root-mean-square bias against the
    exact integral decays like ``S^{-1/2}``.
    """
    fine = np.asarray(fine_increments, dtype=float)
    s, k = fine.shape[-2], fine.shape[-1]
    if s < 2:
        raise ValueError(f"oracle needs at least 2 subdivisions, got {s}")
    partial = np.cumsum(fine, axis=-2)
    values = np.swapaxes(partial[..., :-1, :], -1, -2) @ fine[..., 1:, :]
    values = _eta_scale(spectrum, k) * values
    return IterIntBatch(values=values, h=h, D=0, algorithm="ORACLE")


def choose_D(algorithm: str, M: int, K: int, q: float, spectrum: QSpectrum,
             *, alpha: float | None = None, eigenvalue_based: bool = False) -> int:
    """Series depth keeping the temporal order q intact, clamped to >= 1.

    Step-count based rules (default): ``ceil(M^(2q-1))`` for ALG1 and
    ``ceil(M^(q-1/2) * min(K sqrt(K-1), 1/min_j eta_j))`` for ALG2. The
    opt-in eigenvalue-based variants bound the depth through the spectral
    tail ``sup_{j>K} eta_j`` instead and require ``alpha``.
    """
    if M < 1:
        raise ValueError(f"step count M must be >= 1, got {M}")
    if q <= 0.0:
        raise ValueError(f"temporal order q must be positive, got {q}")
    if algorithm == "ALG1":
        if eigenvalue_based:
            if alpha is None:
                raise ValueError("eigenvalue-based selection needs alpha")
            sup_tail = float(spectrum.etas(K + 1)[-1])
            bound = sup_tail ** (-2.0 * alpha) / M
        else:
            bound = float(M) ** (2.0 * q - 1.0)
    elif algorithm == "ALG2":
        fac = min(K * math.sqrt(max(K - 1, 0)), 1.0 / float(np.min(spectrum.etas(K))))
        if eigenvalue_based:
            if alpha is None:
                raise ValueError("eigenvalue-based selection needs alpha")
            sup_tail = float(spectrum.etas(K + 1)[-1])
            bound = fac * sup_tail ** (-alpha) / math.sqrt(M)
        else:
            bound = float(M) ** (q - 0.5) * fac
    else:
        raise ValueError(f"unknown algorithm tag {algorithm!r}")
    return max(1, math.ceil(bound))


def measure_rmse(algorithm: str, D: int, samples: int, h: float, K: int,
                 spectrum: QSpectrum, master_seed: int, reference_D: int,
                 reference_algorithm: str | None = None, chunk: int = 256) -> float:
    """RMS Frobenius deviation between coupled candidate and reference batches.

    Candidate and reference share the increment draw, the series stream (the
    shallower truncation reads a prefix of the deeper one) and, where
    applicable, the tail normals; the returned value therefore isolates what
    the two constructions do with identical randomness. Used for truncation
    rate fitting.
    """
    ref_alg = reference_algorithm or algorithm
    if algorithm not in ("ALG1", "ALG2") or ref_alg not in ("ALG1", "ALG2"):
        raise ValueError("algorithm tags must be ALG1 or ALG2")
    depth = max(D, reference_D)
    eta = _eta_scale(spectrum, K)
    n_pairs = K * (K - 1) // 2
    inc_rng = derive_stream(master_seed, 0, INCREMENTS)
    series_rng = derive_stream(master_seed, 0, SERIES)
    tail_rng = derive_stream(master_seed, 0, TAIL)
    total = 0.0
    done = 0
    while done < samples:
        c = min(chunk, samples - done)
        b = inc_rng.standard_normal((c, K)) * math.sqrt(h)
        draws = series_rng.standard_normal((c, depth, 2, K))
        z = tail_rng.standard_normal((c, n_pairs)) if n_pairs else np.zeros((c, 0))
        sides = []
        for alg, d in ((algorithm, D), (ref_alg, reference_D)):
            area = levy_series(draws[:, :d, 0, :], draws[:, :d, 1, :], b, h)
            if alg == "ALG2" and n_pairs:
                area = area + tail_from_normals(b, h, tail_sum_scale(h, d), z)
            sides.append(eta * (_symmetric_part(b, h) + area))
        diff = sides[0] - sides[1]
        total += float(np.sum(diff * diff))
        done += c
    return math.sqrt(total / samples)


def sample_unconditional(algorithm: str, n: int, h: float, D: int, K: int,
                         spectrum: QSpectrum, rng, delta_beta=None,
                         chunk_entries: int = 1 << 26):
    """Vectorized sampler of n batches for moment studies.

    Draws increments too unless ``delta_beta`` (shape (K,) or (n, K)) is
    supplied; returns ``(values, delta_beta)`` with values of shape
    (n, K, K). Uses one sequential stream; per-sample draw layout matches
    the public batch constructors. The transient series block is chunked to
    at most ``chunk_entries`` doubles.
    """
    if algorithm not in ("ALG1", "ALG2"):
        raise ValueError(f"unknown algorithm tag {algorithm!r}")
    if delta_beta is None:
        b = rng.standard_normal((n, K)) * math.sqrt(h)
    else:
        b = np.broadcast_to(np.asarray(delta_beta, dtype=float), (n, K))
    scale = _eta_scale(spectrum, K)
    a_d = tail_sum_scale(h, D)
    values = np.empty((n, K, K))
    step = max(1, chunk_entries // max(D * 2 * K, 1))
    for start in range(0, n, step):
        stop = min(n, start + step)
        bs = b[start:stop]
        draws = rng.standard_normal((stop - start, D, 2, K))
        area = levy_series(draws[:, :, 0, :], draws[:, :, 1, :], bs, h)
        if algorithm == "ALG2" and K >= 2:
            z = rng.standard_normal((stop - start, K * (K - 1) // 2))
            area = area + tail_from_normals(bs, h, a_d, z)
        values[start:stop] = scale * (_symmetric_part(bs, h) + area)
    return values, b
