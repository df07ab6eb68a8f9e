"""Eigenbasis bookkeeping for a diagonal generator.

The linear operator ``-A`` is diagonal in a fixed orthonormal basis with
positive eigenvalues ``lambda_i``, so states are plain coefficient vectors
and the analytic semigroup ``e^{Ah}``, the implicit-Euler resolvent
``(I - hA)^{-1}``, Galerkin projections and fractional-power norms are all
componentwise operations on eigenvalue arrays.

Eigenvalue rules are closed-form maps ``i -> lambda_i`` (vectorized over
integer arrays), never precomputed tables, so any truncation level works
without reallocation. Basis functions are never materialized; physical-space
evaluation for the Dirichlet sine basis is available as a diagnostic only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "EigenBasis",
    "GalerkinState",
    "semigroup_factors",
    "resolvent_factors",
    "fractional_norm",
    "project",
    "dirichlet_laplacian_basis",
    "evaluate_sine_state",
]


@dataclass(frozen=True)
class EigenBasis:
    """Closed-form spectrum of ``-A``.

    ``lambda_rule`` maps 1-based integer indices (scalar or ndarray) to the
    eigenvalues of ``-A``; ``rho_A`` is the growth exponent such that
    ``(inf_{i>N} lambda_i)^{-1} = O(N^{-rho_A})``.
    """

    lambda_rule: Callable[[np.ndarray], np.ndarray]
    rho_A: float

    def lambdas(self, n: int) -> np.ndarray:
        """Eigenvalues ``lambda_1 .. lambda_n`` as a float array."""
        if n < 1:
            raise ValueError(f"need at least one mode, got n={n}")
        lam = np.asarray(self.lambda_rule(np.arange(1, n + 1)), dtype=float)
        if lam.shape != (n,):
            raise ValueError("lambda_rule must be vectorized over index arrays")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0.0):
            raise ValueError("eigenvalues of -A must be finite and positive")
        return lam


@dataclass(frozen=True)
class GalerkinState:
    """Coefficient vector of a state in the span of the leading basis modes."""

    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if arr.ndim != 1:
            raise ValueError("state coefficients must be a 1-d vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("state coefficients must be finite")
        object.__setattr__(self, "coeffs", arr)

    def __len__(self):
        return self.coeffs.shape[0]


def dirichlet_laplacian_basis(scale: float = 1.0 / 100.0) -> EigenBasis:
    """Spectrum of ``scale * Laplacian`` with Dirichlet conditions on (0, 1).

    Eigenvalues are ``scale * pi^2 i^2`` (decay exponent 2); eigenfunctions
    are ``sqrt(2) sin(i pi x)``, kept implicit.
    """
    return EigenBasis(lambda_rule=lambda idx: scale * np.pi**2 * np.asarray(idx, dtype=float) ** 2, rho_A=2.0)


def semigroup_factors(basis: EigenBasis, N: int, h: float) -> np.ndarray:
    """Componentwise factors ``exp(-lambda_i h)`` realizing ``P_N e^{Ah}``."""
    if not np.isfinite(h) or h < 0.0:
        raise ValueError(f"step h must be finite and nonnegative, got {h}")
    return np.exp(-basis.lambdas(N) * h)


def resolvent_factors(basis: EigenBasis, N: int, h: float) -> np.ndarray:
    """Componentwise factors ``(1 + lambda_i h)^{-1}`` of the implicit-Euler resolvent."""
    if not np.isfinite(h) or h <= 0.0:
        raise ValueError(f"step h must be finite and positive, got {h}")
    return 1.0 / (1.0 + basis.lambdas(N) * h)


def fractional_norm(state: GalerkinState, basis: EigenBasis, r: float) -> float:
    """Fractional-power norm ``((sum_i lambda_i^{2r} c_i^2))^{1/2}``.

    ``r = 0`` reduces exactly to the Euclidean norm of the coefficients.
    """
    if r < 0.0:
        raise ValueError(f"fractional order r must be nonnegative, got {r}")
    c = state.coeffs
    if c.size == 0:
        return 0.0
    if r == 0.0:
        return float(np.linalg.norm(c))
    lam = basis.lambdas(c.size)
    return float(np.sqrt(np.sum(lam ** (2.0 * r) * c**2)))


def project(state: GalerkinState, N_target: int) -> GalerkinState:
    """Truncate or zero-pad the coefficient vector to length ``N_target``. Idempotent."""
    if N_target < 0:
        raise ValueError("projection size must be nonnegative")
    c = state.coeffs
    if c.size >= N_target:
        out = c[:N_target].copy()
    else:
        out = np.zeros(N_target)
        out[: c.size] = c
    return GalerkinState(coeffs=out, time=state.time)


def evaluate_sine_state(state: GalerkinState, x: np.ndarray) -> np.ndarray:
    """Diagnostic physical-space evaluation against ``sqrt(2) sin(i pi x)``."""
    x = np.asarray(x, dtype=float)
    idx = np.arange(1, len(state) + 1)
    return np.sqrt(2.0) * np.sin(np.pi * np.outer(x, idx)) @ state.coeffs
