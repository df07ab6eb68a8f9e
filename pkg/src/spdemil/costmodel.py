"""Unit-cost accounting, effective orders of convergence, scheme selection.

Under the unit-cost model (every real-functional evaluation and every
standard-normal draw costs ``c >= 1``, elementary arithmetic costs 1), each
scheme has a closed-form total cost in the resolution triple (M, N, K) and,
after optimizing the error bound

``err = O(N^{-gamma rho_A} + K^{-alpha rho_Q} + M^{-q})``

subject to a cost budget, an effective order of convergence (EOC): the
exponent of error decay per unit cost. Which cost term dominates depends on
closed-form parameter conditions; this module evaluates the conditions, the
per-case EOC formulas, the optimal resolution exponents, and the decision
table that picks the best scheme among MIL1, MIL2 and EES.

Everything here is deterministic arithmetic; integer-valued cost formulas
are accumulated in exact integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

__all__ = [
    "CostParams",
    "ConditionFlags",
    "CostBreakdown",
    "ResolutionChoice",
    "SelectionReport",
    "EOC_CASES",
    "total_cost",
    "step_normal_draws",
    "step_functional_evals",
    "check_conditions",
    "eoc",
    "choice_exponents",
    "optimal_resolution",
    "select_scheme",
]

EOC_CASES = ("STANDARD", "MIL1C1", "MIL2C2", "MIL2C3A", "MIL2C3B", "EES")


@dataclass(frozen=True)
class CostParams:
    """Regularity/decay parameters entering cost and EOC formulas.

    ``q`` is the temporal order of the scheme under consideration; ``c`` the
    unit cost of functional evaluations and normal draws.
    """

    gamma: float
    beta: float
    alpha: float
    rho_A: float
    rho_Q: float
    q: float
    c: float = 1.0

    def __post_init__(self):
        if not self.rho_Q > 1.0:
            raise ValueError(f"rho_Q must exceed 1, got {self.rho_Q}")
        if not self.q > 0.0:
            raise ValueError(f"temporal order q must be positive, got {self.q}")
        if not self.c >= 1.0:
            raise ValueError(f"unit cost c must be >= 1, got {self.c}")

    @property
    def g(self) -> float:
        """Spatial decay product ``gamma * rho_A``."""
        return self.gamma * self.rho_A

    @property
    def a(self) -> float:
        """Noise decay product ``alpha * rho_Q``."""
        return self.alpha * self.rho_Q


def step_normal_draws(kind: str, K: int, D: int = 0) -> int:
    """Standard-normal draws of one time step (increment included)."""
    if kind == "MIL1":
        return K * (1 + 2 * D)
    if kind == "MIL2":
        return K * (1 + 2 * D) + K * (K - 1) // 2
    if kind in ("EES", "LIE"):
        return K
    raise ValueError(f"unknown scheme kind {kind!r}")


def step_functional_evals(kind: str, N: int, K: int) -> int:
    """Real-functional evaluations of one time step (drift, diffusion, derivative)."""
    if kind in ("MIL1", "MIL2"):
        return N + K * N + K * N * N
    if kind in ("EES", "LIE"):
        return N + K * N
    raise ValueError(f"unknown scheme kind {kind!r}")


def _pow_exact(base: int, expo: float):
    """``base ** expo`` as an exact int when representable, else float."""
    if expo == int(expo):
        return base ** int(expo)
    doubled = 2.0 * expo
    if doubled == int(doubled):
        root = math.isqrt(base)
        if root * root == base:
            return root ** int(doubled)
    return float(base) ** expo


@dataclass(frozen=True)
class CostBreakdown:
    """Closed-form cost of one run configuration.

    ``caption`` is the full formula (all addends); ``dominant`` drops the
    lowest-order addends, matching the convention of the published cost
    columns; ``primitives`` is the per-primitive tally (functional
    evaluations plus normal draws per step, times M, times c).
    """

    scheme: str
    caption: float
    dominant: float
    primitives: float
    functional_evals: int
    normal_draws: int


def total_cost(scheme: str, M: int, N: int, K: int, D: Optional[int] = None,
               q: float = 1.0, c: float = 1.0) -> CostBreakdown:
    """Evaluate the cost formulas for one resolution triple.

    MIL1: ``M K N^2 + K M^{2q} (+ M(K+N+KN))``;
    MIL2: ``M K N^2 + M^{q+1/2} K^{5/2} + M K^2 (+ M(K+N+KN))``;
    EES/LIE: ``M K N (+ M N + M K)``. Integer-valued formulas are exact.
    """
    if min(M, N, K) < 1:
        raise ValueError("M, N, K must be positive")
    low = M * (K + N + K * N)
    if scheme == "MIL1":
        if D is None or D < 1:
            raise ValueError("MIL1 cost needs the series depth D")
        dominant = M * K * N**2 + K * _pow_exact(M, 2.0 * q)
        caption = dominant + low
    elif scheme == "MIL2":
        if D is None or D < 1:
            raise ValueError("MIL2 cost needs the series depth D")
        dominant = M * K * N**2 + _pow_exact(M, q + 0.5) * _pow_exact(K, 2.5) + M * K**2
        caption = dominant + low
    elif scheme in ("EES", "LIE"):
        dominant = M * K * N
        caption = dominant + M * N + M * K
    else:
        raise ValueError(f"unknown scheme kind {scheme!r}")
    fevals = step_functional_evals(scheme, N, K)
    draws = step_normal_draws(scheme, K, D or 0)
    primitives = c * M * (fevals + draws)
    return CostBreakdown(scheme=scheme, caption=caption, dominant=dominant,
                         primitives=primitives, functional_evals=M * fevals,
                         normal_draws=M * draws)


@dataclass(frozen=True)
class ConditionFlags:
    """Truth values of the dominating-cost-regime conditions."""

    M1C1: bool
    M1C2: bool
    M2C1a: bool
    M2C1b: bool
    M2C2a: bool
    M2C2b: bool
    M2C3a: bool
    M2C3b: bool

    def as_dict(self):
        return {k: getattr(self, k) for k in
                ("M1C1", "M1C2", "M2C1a", "M2C1b", "M2C2a", "M2C2b", "M2C3a", "M2C3b")}


def check_conditions(p: CostParams) -> ConditionFlags:
    """Evaluate every regime predicate exactly as stated.

    MIL1 splits on ``g(2q-1)`` against ``2q``; MIL2 additionally branches on
    ``rho_Q >= 3/2`` versus ``< 3/2`` (g, a denote the decay products
    ``gamma rho_A`` and ``alpha rho_Q``).
    """
    g, a, q = p.g, p.a, p.q
    al, rq = p.alpha, p.rho_Q
    heavy = rq >= 1.5
    mixed_a = 1.5 * g * q + (q - 0.5) * a * g  # vs 2 a q
    mixed_b = g * q + (q - 0.5) * al * g       # vs 2 alpha q
    return ConditionFlags(
        M1C1=g * (2.0 * q - 1.0) >= 2.0 * q,
        M1C2=g * (2.0 * q - 1.0) <= 2.0 * q,
        M2C1a=heavy and g <= 2.0 * a and mixed_a <= 2.0 * a * q,
        M2C1b=(not heavy) and g <= 2.0 * a and mixed_b <= 2.0 * al * q,
        M2C2a=heavy and 2.0 * a <= g and q <= a / (2.0 * a + 1.0),
        M2C2b=(not heavy) and 2.0 * a <= g and q < a / (2.0 * a + 2.0 * (rq - 1.0)),
        M2C3a=heavy and 2.0 * a * q <= mixed_a and q >= a / (2.0 * a + 1.0),
        M2C3b=(not heavy) and 2.0 * al * q <= mixed_b and q >= a / (2.0 * a + 2.0 * (rq - 1.0)),
    )


def eoc(scheme_case: str, p: CostParams) -> float:
    """Effective order of convergence for one dominating-cost case."""
    g, a, q = p.g, p.a, p.q
    if scheme_case == "STANDARD":
        return g * a * q / ((2.0 * a + g) * q + a * g)
    if scheme_case == "MIL1C1":
        return a / (2.0 * a + 1.0)
    if scheme_case == "MIL2C2":
        return a * q / (a + 2.0 * q)
    if scheme_case == "MIL2C3A":
        return a * q / (a * (q + 0.5) + 2.5 * q)
    if scheme_case == "MIL2C3B":
        return a * q / (a * (q + 0.5) + q * (p.rho_Q + 1.0))
    if scheme_case == "EES":
        return q * g * a / ((a + g) * q + g * a)
    raise ValueError(f"unknown EOC case {scheme_case!r}")


@dataclass(frozen=True)
class ResolutionChoice:
    """Budget exponents and rounded counts of the optimal resolution triple."""

    case: str
    e_M: float
    e_N: float
    e_K: float
    M: int
    N: int
    K: int


def choice_exponents(scheme_case: str, p: CostParams) -> tuple:
    """Budget exponents ``(e_M, e_N, e_K)`` of the optimal resolution triple."""
    g, a, q = p.g, p.a, p.q
    if scheme_case == "STANDARD":
        d = (2.0 * a + g) * q + a * g
        return (g * a / d, a * q / d, g * q / d)
    if scheme_case == "MIL1C1":
        return (a / ((2.0 * a + 1.0) * q), a / ((2.0 * a + 1.0) * g), 1.0 / (2.0 * a + 1.0))
    if scheme_case == "MIL2C2":
        d = a + 2.0 * q
        return (a / d, a * q / (g * d), q / d)
    if scheme_case == "MIL2C3A":
        d = a * (q + 0.5) + 2.5 * q
        return (a / d, a * q / (g * d), q / d)
    if scheme_case == "MIL2C3B":
        d = a * (q + 0.5) + q * (p.rho_Q + 1.0)
        return (a / d, a * q / (g * d), q / d)
    if scheme_case == "EES":
        d = (a + g) * q + a * g
        return (g * a / d, a * q / d, g * q / d)
    raise ValueError(f"unknown choice case {scheme_case!r}")


def optimal_resolution(scheme_case: str, p: CostParams, budget: float) -> ResolutionChoice:
    """Cost-budget exponents for M, N, K in the given dominating case.

    Counts are ``ceil(budget ** exponent)``. For the shipped example
    parameters the Milstein exponents satisfy ``M = N^2`` and
    ``K = ceil(N^{2/7})``, and the exponential Euler ones ``M = N^4``.
    """
    if budget <= 1.0:
        raise ValueError(f"budget must exceed 1, got {budget}")
    exps = choice_exponents(scheme_case, p)
    counts = tuple(max(1, math.ceil(budget**e)) for e in exps)
    return ResolutionChoice(scheme_case, *exps, *counts)


_COST_REGIME = {
    "STANDARD": "M K N^2",
    "MIL1C1": "M^{2q} K",
    "MIL2C2": "M K^2",
    "MIL2C3A": "M^{q+1/2} K^{5/2}",
    "MIL2C3B": "M^{q+1/2} K^{rho_Q+1}",
    "EES": "M K N",
}


@dataclass(frozen=True)
class SelectionReport:
    """Outcome of the scheme-selection decision table for one equation."""

    flags: ConditionFlags
    cost_regime: dict
    eoc_per_scheme: dict
    optimal: str
    eoc_case: str
    choice_case: str
    eoc_value: float
    exponents: tuple
    rule: str


def _mil1_case(flags: ConditionFlags) -> str:
    # at the M1 boundary both hold and the two formulas agree; prefer STANDARD
    return "STANDARD" if flags.M1C2 else "MIL1C1"


def _mil2_case(flags: ConditionFlags) -> Optional[str]:
    if flags.M2C1a or flags.M2C1b:
        return "STANDARD"
    if flags.M2C3a:
        return "MIL2C3A"
    if flags.M2C3b:
        return "MIL2C3B"
    if flags.M2C2a or flags.M2C2b:
        return "MIL2C2"
    return None


def select_scheme(p_mil: CostParams, p_ees: CostParams) -> SelectionReport:
    """Walk the decision table and return the scheme with the best EOC.

    ``p_mil`` carries the Milstein temporal order, ``p_ees`` the Euler one
    (same equation otherwise). Whenever the Milstein order does not exceed
    1/2, the exponential Euler scheme wins unconditionally; otherwise the
    table rows are checked in order. Raises if no row matches (a parameter
    set outside the partition), listing all flag values.
    """
    flags = check_conditions(p_mil)
    g, a, q = p_mil.g, p_mil.a, p_mil.q
    al = p_mil.alpha

    eoc_map = {}
    eoc_map["MIL1"] = eoc(_mil1_case(flags), p_mil)
    m2 = _mil2_case(flags)
    eoc_map["MIL2"] = eoc(m2, p_mil) if m2 is not None else None
    eoc_map["EES"] = eoc("EES", p_ees)
    regimes = {
        "MIL1": _COST_REGIME[_mil1_case(flags)],
        "MIL2": _COST_REGIME[m2] if m2 is not None else None,
        "EES": _COST_REGIME["EES"],
    }

    def report(optimal, eoc_case, choice_case, rule, params):
        return SelectionReport(
            flags=flags,
            cost_regime=regimes,
            eoc_per_scheme=eoc_map,
            optimal=optimal,
            eoc_case=eoc_case,
            choice_case=choice_case,
            eoc_value=eoc(eoc_case, params),
            exponents=choice_exponents(choice_case, params),
            rule=rule,
        )

    if q <= 0.5:
        return report("EES", "EES", "EES", "q_MIL <= 1/2: exponential Euler always optimal", p_ees)

    rows = (
        (flags.M1C1 and flags.M2C1a, "MIL2", "STANDARD", "STANDARD", "M1C1 & M2C1a", p_mil),
        (flags.M1C1 and flags.M2C1b, "MIL2", "STANDARD", "STANDARD", "M1C1 & M2C1b", p_mil),
        (flags.M1C1 and flags.M2C3a and (2.0 * a - 3.0) * q < a,
         "MIL1", "MIL1C1", "MIL1C1", "M1C1 & M2C3a & (2a-3)q < a", p_mil),
        (flags.M1C1 and flags.M2C3a and (2.0 * a - 3.0) * q >= a,
         "MIL2", "MIL2C3A", "MIL2C3A", "M1C1 & M2C3a & (2a-3)q >= a", p_mil),
        (flags.M1C1 and flags.M2C3b and al * (2.0 * q - 1.0) < 2.0 * q,
         "MIL1", "MIL1C1", "MIL1C1", "M1C1 & M2C3b & alpha(2q-1) < 2q", p_mil),
        (flags.M1C1 and flags.M2C3b and al * (2.0 * q - 1.0) >= 2.0 * q,
         "MIL2", "MIL2C3B", "MIL2C3B", "M1C1 & M2C3b & alpha(2q-1) >= 2q", p_mil),
        (flags.M1C2 and g * (2.0 * q - 1.0) <= q,
         "EES", "EES", "EES", "M1C2 & g(2q-1) <= q", p_ees),
        (flags.M1C2 and flags.M2C1a and g * (2.0 * q - 1.0) > q,
         "MIL1=MIL2", "STANDARD", "STANDARD", "M1C2 & M2C1a & g(2q-1) > q", p_mil),
        (flags.M1C2 and flags.M2C1b and g * (2.0 * q - 1.0) > q,
         "MIL1=MIL2", "STANDARD", "STANDARD", "M1C2 & M2C1b & g(2q-1) > q", p_mil),
        (flags.M1C2 and flags.M2C3a and g * (2.0 * q - 1.0) > q,
         "MIL1", "STANDARD", "STANDARD", "M1C2 & M2C3a & g(2q-1) > q", p_mil),
        (flags.M1C2 and flags.M2C3b and g * (2.0 * q - 1.0) > q,
         "MIL1", "STANDARD", "STANDARD", "M1C2 & M2C3b & g(2q-1) > q", p_mil),
    )
    for match, optimal, eoc_case, choice_case, rule, params in rows:
        if match:
            return report(optimal, eoc_case, choice_case, rule, params)
    raise ValueError(f"no decision-table row matches; flags: {flags.as_dict()}")
