"""Time steppers and trajectory runners driven by shared coupled noise.

Four schemes over the same spectral-Galerkin discretization:

* ``MIL1`` / ``MIL2`` - Milstein steps with exact semigroup propagation and a
  second-order correction contracted against approximated iterated
  integrals (truncated series, respectively series plus Gaussian tail).
* ``EES``  - exponential Euler: the Milstein step with the correction
  removed.
* ``LIE``  - linear implicit Euler: resolvent propagation instead of the
  semigroup; used as the reference-solution generator.

All schemes consume increments aggregated from one shared finest-grid
table, so runs at different resolutions see the same noise realization.
Iterated-integral randomness comes from per-(path, purpose, step) derived
streams and is independent of the increments, hence changing the series
depth never perturbs the increments a run consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _engine
from .costmodel import step_normal_draws
from .iterints import IterIntBatch, levy_series, tail_from_normals, tail_sum_scale
from .noise import SERIES, TAIL, FinePath, aggregate, derive_stream, q_increment
from .operators import SpdeProblem, apply_B, milstein_correction
from .spectral import GalerkinState, resolvent_factors, semigroup_factors

__all__ = [
    "SCHEME_KINDS",
    "SchemeConfig",
    "TrajectoryResult",
    "step_mil",
    "step_ees",
    "step_lie",
    "run_trajectory",
    "step_normal_draws",
]

SCHEME_KINDS = ("MIL1", "MIL2", "EES", "LIE")


@dataclass(frozen=True)
class SchemeConfig:
    """One scheme at one resolution triple (N modes, K noise modes, M steps)."""

    kind: str
    N: int
    K: int
    M: int
    problem: SpdeProblem
    D: int = 0

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.M < 1 or self.N < 1 or self.K < 1:
            raise ValueError("N, K, M must all be positive")
        if self.problem.T / self.M <= 0.0:
            raise ValueError("step size T/M must be positive")
        if self.kind in ("MIL1", "MIL2") and self.D < 1:
            raise ValueError(f"{self.kind} needs a series depth D >= 1")

    @property
    def h(self) -> float:
        return self.problem.T / self.M


def _check_state(config: SchemeConfig, state: GalerkinState) -> None:
    if len(state) != config.N:
        raise ValueError(f"state has {len(state)} coefficients, config expects N={config.N}")


def step_mil(config: SchemeConfig, state: GalerkinState, q_inc: np.ndarray,
             iter_batch: IterIntBatch) -> GalerkinState:
    """One Milstein step: semigroup of (state + h drift + noise + correction)."""
    _check_state(config, state)
    q = np.asarray(q_inc, dtype=float)
    if q.shape != (config.K,):
        raise ValueError(f"noise increment must have length K={config.K}")
    h = config.h
    y = state.coeffs
    prop = semigroup_factors(config.problem.basis, config.N, h)
    drift = config.problem.drift_rule(y)
    corr = milstein_correction(config.problem, state, iter_batch, config.N, config.K)
    new = prop * (y + h * drift + apply_B(config.problem, state, config.K) @ q + corr)
    return GalerkinState(new, time=state.time + h)


def step_ees(config: SchemeConfig, state: GalerkinState, q_inc: np.ndarray) -> GalerkinState:
    """One exponential Euler step: the Milstein step without the correction."""
    _check_state(config, state)
    q = np.asarray(q_inc, dtype=float)
    if q.shape != (config.K,):
        raise ValueError(f"noise increment must have length K={config.K}")
    h = config.h
    y = state.coeffs
    prop = semigroup_factors(config.problem.basis, config.N, h)
    new = prop * (y + h * config.problem.drift_rule(y) + apply_B(config.problem, state, config.K) @ q)
    return GalerkinState(new, time=state.time + h)


def step_lie(config: SchemeConfig, state: GalerkinState, q_inc: np.ndarray) -> GalerkinState:
    """One linear implicit Euler step: resolvent instead of the semigroup."""
    _check_state(config, state)
    q = np.asarray(q_inc, dtype=float)
    if q.shape != (config.K,):
        raise ValueError(f"noise increment must have length K={config.K}")
    h = config.h
    y = state.coeffs
    prop = resolvent_factors(config.problem.basis, config.N, h)
    new = prop * (y + h * config.problem.drift_rule(y) + apply_B(config.problem, state, config.K) @ q)
    return GalerkinState(new, time=state.time + h)


@dataclass(frozen=True)
class TrajectoryResult:
    """Endpoint (and optionally full grid) of one scheme run on one path."""

    final: GalerkinState
    path: Optional[np.ndarray]
    D: int
    normal_draws_per_step: int
    normal_draws_total: int
    column_totals: np.ndarray
    backend: str


# cap on the transient (steps x D x 2 x K) series block: 2^23 doubles = 64 MiB
_SERIES_CHUNK_ENTRIES = 1 << 23


def _assemble_iterints(config: SchemeConfig, inc: np.ndarray, master_seed: int,
                       path_index: int) -> np.ndarray:
    """(M, K, K) scaled iterated-integral matrices from derived streams.

    Per step m the series normals come from stream (path, SERIES, m) as one
    C-ordered (D, 2, K) block and, for MIL2, the tail normals from stream
    (path, TAIL, m); layouts match the public batch constructors. The tail
    is applied through the closed-form symmetric root, which agrees with the
    eigendecomposition route to floating-point accuracy.
    """
    M, K = inc.shape
    D, h = config.D, config.h
    eta = config.problem.spectrum.etas(K)
    if np.any(eta == 0.0):
        raise ValueError("eta_j must be nonzero for every retained noise mode")
    scale = np.sqrt(np.outer(eta, eta))
    with_tail = config.kind == "MIL2" and K >= 2
    n_pairs = K * (K - 1) // 2
    a_d = tail_sum_scale(h, D) if with_tail else 0.0
    eye = np.eye(K)

    out = np.empty((M, K, K))
    chunk = max(1, _SERIES_CHUNK_ENTRIES // max(D * 2 * K, 1))
    for start in range(0, M, chunk):
        stop = min(M, start + chunk)
        draws = np.empty((stop - start, D, 2, K))
        for m in range(start, stop):
            draws[m - start] = derive_stream(master_seed, path_index, SERIES, m).standard_normal((D, 2, K))
        b = inc[start:stop]
        area = levy_series(draws[:, :, 0, :], draws[:, :, 1, :], b, h)
        if with_tail:
            z = np.empty((stop - start, n_pairs))
            for m in range(start, stop):
                z[m - start] = derive_stream(master_seed, path_index, TAIL, m).standard_normal(n_pairs)
            area += tail_from_normals(b, h, a_d, z)
        sym = 0.5 * (b[:, :, None] * b[:, None, :] - h * eye)
        out[start:stop] = scale * (sym + area)
    return out


def run_trajectory(config: SchemeConfig, fine_path: FinePath,
                   master_seed: Optional[int] = None, path_index: Optional[int] = None,
                   *, return_path: bool = False) -> TrajectoryResult:
    """Run the configured scheme over all M steps of one coupled sample path.

    Increments are aggregated from ``fine_path`` (whose row count must be a
    multiple of M and whose column count must cover K); extra randomness for
    the Milstein schemes is drawn from streams derived from
    ``(master_seed, path_index)``, defaulting to the identity recorded on the
    fine path. Problems carrying the bilinear-family fast-path descriptors
    run on the compiled kernel when available.
    """
    if fine_path.M_fine % config.M != 0:
        raise ValueError(f"fine grid {fine_path.M_fine} not divisible by M={config.M}")
    if config.K > fine_path.K_max:
        raise ValueError(f"K={config.K} exceeds the table's {fine_path.K_max} columns")
    seed = fine_path.seed if master_seed is None else master_seed
    pidx = fine_path.path_index if path_index is None else path_index

    problem = config.problem
    inc = aggregate(fine_path, config.M)[:, : config.K]
    inc = np.ascontiguousarray(inc)
    column_totals = inc.sum(axis=0)

    iints = None
    if config.kind in ("MIL1", "MIL2"):
        iints = _assemble_iterints(config, inc, seed, pidx)

    per_step = step_normal_draws(config.kind, config.K, config.D)
    h = config.h
    y0 = np.asarray(problem.initial_rule(config.N), dtype=float)

    fast = (
        problem.linear_family is not None
        and problem.drift_affine is not None
        and config.K <= config.N
    )
    if fast:
        const_rule, f_lin = problem.drift_affine
        if config.kind == "LIE":
            prop = resolvent_factors(problem.basis, config.N, h)
        else:
            prop = semigroup_factors(problem.basis, config.N, h)
        final, path = _engine.run_linear_trajectory(
            prop,
            np.asarray(const_rule(config.N), dtype=float),
            float(f_lin),
            problem.linear_family.weights(config.N, config.K),
            np.sqrt(problem.spectrum.etas(config.K)),
            inc,
            h,
            y0,
            iints=iints,
            return_path=return_path,
        )
        backend = _engine.BACKEND
        final_state = GalerkinState(final, time=problem.T)
    else:
        state = GalerkinState(y0, time=0.0)
        path = np.empty((config.M + 1, config.N)) if return_path else None
        if return_path:
            path[0] = state.coeffs
        for m in range(config.M):
            q_inc = q_increment(inc[m], problem.spectrum, config.K)
            if config.kind in ("MIL1", "MIL2"):
                batch = IterIntBatch(values=iints[m], h=h, D=config.D, algorithm="ALG1" if config.kind == "MIL1" else "ALG2")
                state = step_mil(config, state, q_inc, batch)
            elif config.kind == "EES":
                state = step_ees(config, state, q_inc)
            else:
                state = step_lie(config, state, q_inc)
            if return_path:
                path[m + 1] = state.coeffs
        backend = "generic"
        final_state = GalerkinState(state.coeffs, time=problem.T)

    return TrajectoryResult(
        final=final_state,
        path=path,
        D=config.D if config.kind in ("MIL1", "MIL2") else 0,
        normal_draws_per_step=per_step,
        normal_draws_total=per_step * config.M,
        column_totals=column_totals,
        backend=backend,
    )
