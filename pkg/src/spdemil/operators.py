"""SPDE problem data model: drift, bilinear diffusion family, checkers.

An equation is described entirely in coefficient space. The diffusion
operator is a doubly indexed family of functionals ``mu_ij(y)`` (row i in the
state basis, column j in the noise basis) together with their directional
derivatives ``phi^k_ij(y)``; from these the Milstein correction term is a
triple contraction against one step's iterated-integral matrix.

The shipped example instance uses the scaled Dirichlet Laplacian, cubic
noise spectrum decay, affine drift ``y -> 1 - y`` and the bilinear family
``mu_ij(y) = <y, e_j> / (i^p + j^p)`` (default p = 4), which does not
satisfy the commutativity identity - the situation the whole machinery
exists for. A numerical falsifier and mechanical range checks for the
admissible regularity parameters are included.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .noise import QSpectrum, cubic_decay_spectrum
from .spectral import EigenBasis, GalerkinState, dirichlet_laplacian_basis

__all__ = [
    "RegularityParams",
    "LinearFunctionalFamily",
    "SpdeProblem",
    "example_problem",
    "constant_one_coeffs",
    "apply_B",
    "milstein_correction",
    "check_commutativity",
    "check_assumptions",
    "AssumptionReport",
    "phi_finite_difference_residual",
]


@dataclass(frozen=True)
class RegularityParams:
    """Admissible smoothness/decay parameters of an equation.

    Enforced ranges: ``beta in [0,1)``, ``delta in (0,1/2)``,
    ``gamma in [max(beta, delta), delta + 1/2)``, ``vartheta in (0,1/2)``,
    ``alpha > 0``. Temporal orders are derived: ``q_mil = min(2(gamma-beta),
    gamma)`` and ``q_ees = min(1/2, 2(gamma-beta), gamma)``.
    """

    beta: float
    gamma: float
    delta: float
    alpha: float
    vartheta: float

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0,1), got {self.beta}")
        if not 0.0 < self.delta < 0.5:
            raise ValueError(f"delta must lie in (0,1/2), got {self.delta}")
        lo = max(self.beta, self.delta)
        if not lo <= self.gamma < self.delta + 0.5:
            raise ValueError(
                f"gamma must lie in [max(beta,delta), delta+1/2) = [{lo}, {self.delta + 0.5}), got {self.gamma}"
            )
        if not 0.0 < self.vartheta < 0.5:
            raise ValueError(f"vartheta must lie in (0,1/2), got {self.vartheta}")
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def q_mil(self) -> float:
        return min(2.0 * (self.gamma - self.beta), self.gamma)

    @property
    def q_ees(self) -> float:
        return min(0.5, 2.0 * (self.gamma - self.beta), self.gamma)


@dataclass(frozen=True)
class LinearFunctionalFamily:
    """Descriptor of the bilinear family ``mu_ij(y) = y_j / (i^p + j^p)``.

    Presence of this descriptor on a problem unlocks the vectorized stepping
    kernels; the rule-based operations remain the semantic reference.
    """

    p: float = 4.0

    def weights(self, N: int, K: int) -> np.ndarray:
        i = np.arange(1.0, N + 1.0)[:, None]
        j = np.arange(1.0, K + 1.0)[None, :]
        return 1.0 / (i**self.p + j**self.p)


@dataclass(frozen=True)
class SpdeProblem:
    """Full specification of one equation in coefficient space.

    ``drift_rule`` maps a coefficient vector to the projected drift
    coefficients; ``mu_rule(i, j, coeffs)`` and ``phi_rule(i, j, k, coeffs)``
    evaluate the diffusion functionals and their directional derivatives
    (all indices 1-based). ``initial_rule(N)`` produces the projected initial
    coefficients. Optional fast-path descriptors: ``linear_family`` for the
    bilinear example family and ``drift_affine = (const_rule, lin)`` when the
    drift is ``const + lin * y`` componentwise.
    """

    basis: EigenBasis
    spectrum: QSpectrum
    T: float
    drift_rule: Callable[[np.ndarray], np.ndarray]
    mu_rule: Callable[[int, int, np.ndarray], float]
    phi_rule: Callable[[int, int, int, np.ndarray], float]
    params: RegularityParams
    initial_rule: Callable[[int], np.ndarray]
    linear_family: Optional[LinearFunctionalFamily] = None
    drift_affine: Optional[tuple] = None
    family_tag: str = "generic"
    epsilon: float = field(default=0.0)


def constant_one_coeffs(N: int) -> np.ndarray:
    """Coefficients of the constant function 1 against ``sqrt(2) sin(i pi x)``.

    ``<1, e_i> = 2 sqrt(2) / (i pi)`` for odd i, 0 for even i.
    """
    i = np.arange(1, N + 1)
    out = np.where(i % 2 == 1, 2.0 * np.sqrt(2.0) / (np.pi * i), 0.0)
    return out.astype(float)


def example_problem(N_hint: int = 32, K_hint: int = 3, epsilon: float = 1e-6,
                    p: float = 4.0) -> SpdeProblem:
    """The shipped non-commutative example instance.

    Laplacian scaled by 1/100 (eigenvalues ``pi^2 i^2 / 100``), spectrum
    ``eta_j = j^-3``, horizon T = 1, drift ``1 - y``, zero initial value and
    ``mu_ij(y) = <y, e_j>/(i^p + j^p)``. Regularity parameters sit at the
    admissible boundary shifted inward by ``epsilon``: ``gamma = 1 - eps``,
    ``alpha = 7/3 - eps``, ``delta = vartheta = 1/2 - eps/2``, ``beta = 0``.
    """
    del N_hint, K_hint  # sizes are free; rules are closed-form
    family = LinearFunctionalFamily(p=p)

    def mu(i: int, j: int, y: np.ndarray) -> float:
        yj = float(y[j - 1]) if j <= len(y) else 0.0
        return yj / (float(i) ** p + float(j) ** p)

    def phi(i: int, j: int, k: int, y: np.ndarray) -> float:
        del y
        if k != j:
            return 0.0
        return 1.0 / (float(i) ** p + float(j) ** p)

    def drift(coeffs: np.ndarray) -> np.ndarray:
        return constant_one_coeffs(len(coeffs)) - coeffs

    params = RegularityParams(
        beta=0.0,
        gamma=1.0 - epsilon,
        delta=0.5 - 0.5 * epsilon,
        alpha=7.0 / 3.0 - epsilon,
        vartheta=0.5 - 0.5 * epsilon,
    )
    return SpdeProblem(
        basis=dirichlet_laplacian_basis(scale=1.0 / 100.0),
        spectrum=cubic_decay_spectrum(),
        T=1.0,
        drift_rule=drift,
        mu_rule=mu,
        phi_rule=phi,
        params=params,
        initial_rule=lambda n: np.zeros(n),
        linear_family=family,
        drift_affine=(constant_one_coeffs, -1.0),
        family_tag="example",
        epsilon=epsilon,
    )


def apply_B(problem: SpdeProblem, state: GalerkinState, K: int) -> np.ndarray:
    """N x K matrix of the diffusion operator: entry (i, j) is ``mu_ij(state)``.

    Column j holds the coefficient vector of the operator applied to the
    j-th noise basis vector.
    """
    y = state.coeffs
    n = len(y)
    if problem.linear_family is not None:
        w = problem.linear_family.weights(n, K)
        yk = np.zeros(K)
        m = min(n, K)
        yk[:m] = y[:m]
        return w * yk[None, :]
    out = np.empty((n, K))
    for i in range(1, n + 1):
        for j in range(1, K + 1):
            out[i - 1, j - 1] = problem.mu_rule(i, j, y)
    return out


def milstein_correction(problem: SpdeProblem, state: GalerkinState, iter_batch,
                        N: int, K: int) -> np.ndarray:
    """Second-order correction coefficients from one iterated-integral matrix.

    Coefficient on mode i is
    ``sum_{j,r<=K} sum_{k<=N} phi^k_ij(y) mu_kr(y) I[r, j]``, the projected
    contraction of the diffusion derivative with the diffusion itself.
    """
    y = state.coeffs
    if len(y) != N:
        raise ValueError(f"state has {len(y)} coefficients, expected N={N}")
    ivals = iter_batch.values if hasattr(iter_batch, "values") else np.asarray(iter_batch, dtype=float)
    if ivals.shape != (K, K):
        raise ValueError(f"iterated-integral matrix must be {K}x{K}, got {ivals.shape}")
    if problem.linear_family is not None:
        w = problem.linear_family.weights(max(N, K), K)
        yk = np.zeros(K)
        m = min(N, K)
        yk[:m] = y[:m]
        jmax = min(N, K)
        # g_j = sum_r mu_jr(y) I[r, j] over the K retained noise modes
        g = np.einsum("jr,r,rj->j", w[:jmax, :K], yk, ivals[:, :jmax])
        return w[:N, :jmax] @ g
    mu_mat = np.empty((N, K))
    for k in range(1, N + 1):
        for r in range(1, K + 1):
            mu_mat[k - 1, r - 1] = problem.mu_rule(k, r, y)
    corr = np.zeros(N)
    for i in range(1, N + 1):
        acc = 0.0
        for j in range(1, K + 1):
            inner = 0.0
            for k in range(1, N + 1):
                ph = problem.phi_rule(i, j, k, y)
                if ph != 0.0:
                    inner += ph * float(mu_mat[k - 1] @ ivals[:, j - 1])
            acc += inner
        corr[i - 1] = acc
    return corr


def check_commutativity(problem: SpdeProblem, N: int, K: int, trial_states,
                        tol: float = 1e-10):
    """Numerically falsify the commutativity identity on trial states.

    Tests ``sum_k phi^k_im mu_kn == sum_k phi^k_in mu_km`` for all i <= N,
    m < n <= K on every trial state. Returns ``(True, None)`` if no
    violation beyond ``tol`` is found (a non-verdict, not a proof), else
    ``(False, witness)`` with witness fields (i, m, n, state, lhs, rhs).
    """
    states = list(trial_states)
    if not states:
        raise ValueError("need at least one trial state")
    for state in states:
        y = state.coeffs if isinstance(state, GalerkinState) else np.asarray(state, dtype=float)
        for i in range(1, N + 1):
            for m in range(1, K + 1):
                for n in range(m + 1, K + 1):
                    lhs = sum(problem.phi_rule(i, m, k, y) * problem.mu_rule(k, n, y)
                              for k in range(1, N + 1))
                    rhs = sum(problem.phi_rule(i, n, k, y) * problem.mu_rule(k, m, y)
                              for k in range(1, N + 1))
                    if abs(lhs - rhs) > tol:
                        return False, {"i": i, "m": m, "n": n, "state": y, "lhs": lhs, "rhs": rhs}
    return True, None


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    value: float
    bound: str
    passed: bool
    margin: float


@dataclass(frozen=True)
class AssumptionReport:
    checkable: bool
    checks: tuple
    note: str = ""

    @property
    def all_passed(self) -> bool:
        return self.checkable and all(c.passed for c in self.checks)


def check_assumptions(problem: SpdeProblem) -> AssumptionReport:
    """Mechanical verification of the example family's admissible ranges.

    For the example instance the bounds are ``delta < 1/2`` (diffusion maps
    into the smoother space), ``alpha < 7/3`` (spectral tail control) and
    ``gamma in [1/2, 1)``; generic range constraints on beta and vartheta
    are re-checked as well. Other families are reported as not mechanically
    checkable.
    """
    if problem.family_tag != "example":
        return AssumptionReport(checkable=False, checks=(),
                                note="not mechanically checkable for this family")
    p = problem.params
    checks = (
        AssumptionCheck("delta < 1/2", p.delta, "(0, 1/2)",
                        0.0 < p.delta < 0.5, 0.5 - p.delta),
        AssumptionCheck("alpha < 7/3", p.alpha, "(0, 7/3)",
                        0.0 < p.alpha < 7.0 / 3.0, 7.0 / 3.0 - p.alpha),
        AssumptionCheck("gamma in [1/2, 1)", p.gamma, "[1/2, 1)",
                        0.5 <= p.gamma < 1.0, min(p.gamma - 0.5, 1.0 - p.gamma)),
        AssumptionCheck("beta in [0, 1)", p.beta, "[0, 1)",
                        0.0 <= p.beta < 1.0, 1.0 - p.beta),
        AssumptionCheck("vartheta in (0, 1/2)", p.vartheta, "(0, 1/2)",
                        0.0 < p.vartheta < 0.5, 0.5 - p.vartheta),
        AssumptionCheck("gamma < delta + 1/2", p.gamma, "[max(beta,delta), delta+1/2)",
                        max(p.beta, p.delta) <= p.gamma < p.delta + 0.5,
                        p.delta + 0.5 - p.gamma),
    )
    return AssumptionReport(checkable=True, checks=checks)


def phi_finite_difference_residual(problem: SpdeProblem, i: int, j: int, k: int,
                                   coeffs: np.ndarray, eps: float) -> float:
    """|phi^k_ij(y) - central difference of mu_ij in direction e_k|."""
    y = np.asarray(coeffs, dtype=float)
    if k > len(y):
        raise ValueError("direction index exceeds the state length")
    up = y.copy()
    dn = y.copy()
    up[k - 1] += eps
    dn[k - 1] -= eps
    fd = (problem.mu_rule(i, j, up) - problem.mu_rule(i, j, dn)) / (2.0 * eps)
    return abs(problem.phi_rule(i, j, k, y) - fd)
