"""Brownian increment tables and trace-class noise coordinates.

All Wiener randomness for a sample path is drawn once, on the finest grid,
as a table of independent ``N(0, T/M_fine)`` increments, and coarser grids
are produced by exact block sums. Schemes never draw their own increments,
which couples every scheme and the reference solution to the same noise
realization, the prerequisite for strong-error measurement.

Stream derivation contract
--------------------------
All randomness is produced by counter-based Philox streams. A master seed
is expanded once into a 128-bit Philox key via two SplitMix64 steps; the
256-bit Philox counter is then set to ``[0, step, purpose, path]``. Distinct
``(path, purpose, step)`` triples therefore address provably disjoint counter
windows (the low word allows 2^64 blocks per window, never reached), and
the derivation is stable across runs and processes. Purposes:

* ``INCREMENTS`` - the fine increment table (step component 0; the whole
  table is one draw).
* ``SERIES``     - per-step standard normals for the Levy-area series.
* ``TAIL``       - per-step standard normals for the Gaussian tail completion.
* ``ORACLE``     - fine subdivisions used by brute-force validation.

Series and tail randomness is independent of the increment table by key
separation, so changing the series truncation depth never perturbs the
increments.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Callable

import numpy as np
from numpy.random import Generator, Philox

__all__ = [
    "QSpectrum",
    "FinePath",
    "sample_fine_path",
    "aggregate",
    "q_increment",
    "dump_fine_path",
    "load_fine_path",
    "derive_stream",
    "INCREMENTS",
    "SERIES",
    "TAIL",
    "ORACLE",
    "cubic_decay_spectrum",
]

INCREMENTS = 1
SERIES = 2
TAIL = 3
ORACLE = 4

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def master_key(master_seed: int) -> np.ndarray:
    """128-bit Philox key derived from a 64-bit master seed."""
    k0 = _splitmix64(master_seed & _MASK64)
    k1 = _splitmix64(k0)
    return np.array([k0, k1], dtype=np.uint64)


def derive_stream(master_seed: int, path: int, purpose: int, step: int = 0) -> Generator:
    """Independent substream for one ``(path, purpose, step)`` triple."""
    counter = np.array([0, step, purpose, path], dtype=np.uint64)
    return Generator(Philox(key=master_key(master_seed), counter=counter))


@dataclass(frozen=True)
class QSpectrum:
    """Closed-form eigenvalues of the trace-class covariance operator Q.

    ``eta_rule`` maps 1-based indices (vectorized) to nonnegative eigenvalues;
    ``rho_Q > 1`` is the decay exponent with ``sup_{j>K} eta_j = O(K^-rho_Q)``.
    """

    eta_rule: Callable[[np.ndarray], np.ndarray]
    rho_Q: float

    def etas(self, k: int) -> np.ndarray:
        """Eigenvalues ``eta_1 .. eta_k``; must be nonnegative."""
        if k < 1:
            raise ValueError(f"need at least one noise mode, got K={k}")
        eta = np.asarray(self.eta_rule(np.arange(1, k + 1)), dtype=float)
        if eta.shape != (k,):
            raise ValueError("eta_rule must be vectorized over index arrays")
        if not np.all(np.isfinite(eta)) or np.any(eta < 0.0):
            raise ValueError("covariance eigenvalues must be finite and nonnegative")
        return eta


def cubic_decay_spectrum() -> QSpectrum:
    """The shipped example spectrum ``eta_j = j^{-3}`` (decay exponent 3)."""
    return QSpectrum(eta_rule=lambda idx: np.asarray(idx, dtype=float) ** -3.0, rho_Q=3.0)


@dataclass(frozen=True)
class FinePath:
    """Finest-grid table of standard Brownian increments for one sample path.

    ``increments[m, j]`` is the increment of the j-th scalar Brownian motion
    over the m-th step of size ``T/M_fine`` (distribution ``N(0, T/M_fine)``).
    ``seed`` and ``path_index`` record the stream the table was drawn from.
    """

    increments: np.ndarray
    T: float
    seed: int
    path_index: int = 0

    @property
    def M_fine(self) -> int:
        return self.increments.shape[0]

    @property
    def K_max(self) -> int:
        return self.increments.shape[1]


def sample_fine_path(master_seed: int, path_index: int, M_fine: int, K_max: int, T: float) -> FinePath:
    """Draw the fine increment table for one path from its derived stream."""
    if M_fine < 1 or K_max < 1:
        raise ValueError(f"M_fine and K_max must be positive, got {M_fine}, {K_max}")
    if not np.isfinite(T) or T <= 0.0:
        raise ValueError(f"horizon T must be positive, got {T}")
    rng = derive_stream(master_seed, path_index, INCREMENTS, 0)
    table = rng.standard_normal((M_fine, K_max)) * np.sqrt(T / M_fine)
    return FinePath(increments=table, T=T, seed=master_seed, path_index=path_index)


def aggregate(path, M_coarse: int) -> np.ndarray:
    """Block-sum the fine table down to ``M_coarse`` rows.

    Accepts a FinePath or a raw (M, K) increment matrix. Requires the fine
    row count to be a multiple of ``M_coarse``; summing all coarse rows
    telescopes to the same column totals as the fine table.
    """
    table = path.increments if isinstance(path, FinePath) else np.asarray(path, dtype=float)
    m_fine, k = table.shape
    if M_coarse < 1 or m_fine % M_coarse != 0:
        raise ValueError(f"coarse step count {M_coarse} must divide the fine count {m_fine}")
    block = m_fine // M_coarse
    if block == 1:
        return table.copy()
    return table.reshape(M_coarse, block, k).sum(axis=1)


def q_increment(coarse_row: np.ndarray, spectrum: QSpectrum, K: int) -> np.ndarray:
    """Coordinates ``sqrt(eta_j) * dbeta_j`` of one projected Q-Wiener increment."""
    row = np.asarray(coarse_row, dtype=float)
    if K < 1 or K > row.shape[-1]:
        raise ValueError(f"K={K} outside the available {row.shape[-1]} columns")
    eta = spectrum.etas(K)
    if np.any(eta == 0.0):
        raise ValueError("eta_j must be nonzero for every retained noise mode")
    return np.sqrt(eta) * row[..., :K]


_HEADER = struct.Struct("<QQdQ")  # M_fine, K_max, T, seed (little-endian 64-bit fields)


def dump_fine_path(path: FinePath, fh: BinaryIO) -> None:
    """Binary debug dump: header (M_fine, K_max, T, seed) then row-major float64."""
    fh.write(_HEADER.pack(path.M_fine, path.K_max, path.T, path.seed & _MASK64))
    fh.write(np.ascontiguousarray(path.increments, dtype="<f8").tobytes())


def load_fine_path(fh: BinaryIO) -> FinePath:
    """Inverse of :func:`dump_fine_path` (path_index is not stored)."""
    m_fine, k_max, T, seed = _HEADER.unpack(fh.read(_HEADER.size))
    data = np.frombuffer(fh.read(8 * m_fine * k_max), dtype="<f8").reshape(m_fine, k_max)
    return FinePath(increments=data.astype(float), T=T, seed=int(seed))
