"""Monte Carlo experiment orchestration and reporting.

An experiment couples every scheme run and one reference run to the same
per-path finest-grid increment table, accumulates endpoint (or
sup-over-grid) strong errors over a batch of paths, and emits a results
table (``rows.csv``), log-log plot points (``plot.csv``) and a JSON run
manifest. The whole output is a pure function of (configuration, master
seed): path-indexed counter streams make results independent of worker
scheduling, and accumulation happens in fixed path order.

Resolution ladders are derived from the cost-optimal exponent ratios of the
scheme-selection machinery: for the shipped example instance the Milstein
rows satisfy ``M = N^2`` and the exponential Euler rows ``M = N^4``, both
with ``K = ceil(N^{2/7})``.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import costmodel
from .costmodel import CostParams, choice_exponents, total_cost
from .errors import ConfigError, ResourceLimitError
from .iterints import choose_D
from .noise import sample_fine_path
from .operators import SpdeProblem, example_problem
from .schemes import SchemeConfig, run_trajectory
from .util import ceil_snapped, fit_loglog, power_snapped

__all__ = [
    "RunSpec",
    "ExperimentConfig",
    "ExperimentRow",
    "ExperimentResult",
    "desk_config",
    "full_config",
    "strong_order_config",
    "build_problem",
    "derive_ladder",
    "run_experiment",
    "fit_eoc",
    "parse_config",
    "load_config",
    "write_outputs",
]

_DEFAULT_SEED = 20250810
_DEFAULT_CEILING = 1 << 34  # predicted standard-normal draws


@dataclass(frozen=True)
class RunSpec:
    """One (scheme, resolution) row of an experiment."""

    scheme: str
    N: int
    M: int
    K: int
    D: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    """Serializable description of one experiment; see README for the schema."""

    family: str = "example"
    epsilon: float = 1e-6
    p: float = 4.0
    schemes: tuple = ("MIL1", "MIL2", "EES")
    ladder: tuple = (2, 4, 8, 16)
    rows: Optional[tuple] = None  # explicit RunSpecs override the ladder
    paths: int = 200
    ref_scheme: str = "LIE"
    ref_N: int = 32
    ref_K: int = 3
    ref_M: int = 1 << 14
    seed: int = _DEFAULT_SEED
    error_functional: str = "endpoint"  # or "sup-grid"
    error_norm: str = "full"  # or "scheme-span"
    d_q: float = 1.0  # temporal order entering series-depth selection
    cost_q: float = 1.0  # temporal order entering cost formulas
    draw_ceiling: int = _DEFAULT_CEILING
    workers: int = 0  # 0: take SPDEMIL_WORKERS, default 1

    def __post_init__(self):
        if self.error_functional not in ("endpoint", "sup-grid"):
            raise ConfigError(f"unknown error functional {self.error_functional!r}")
        if self.error_norm not in ("full", "scheme-span"):
            raise ConfigError(f"unknown error norm {self.error_norm!r}")
        if self.paths < 1:
            raise ConfigError("paths must be positive")
        for s in self.schemes:
            if s not in ("MIL1", "MIL2", "EES", "LIE"):
                raise ConfigError(f"unknown scheme {s!r}")


def desk_config(**overrides) -> ExperimentConfig:
    """CI-scale defaults: ladder to N=16, reference at M=2^14 (minutes)."""
    return replace(ExperimentConfig(), **overrides)


def full_config(**overrides) -> ExperimentConfig:
    """The published configuration: ladder to N=32, reference at M=2^16."""
    base = ExperimentConfig(ladder=(2, 4, 8, 16, 32), ref_M=1 << 16)
    return replace(base, **overrides)


def strong_order_config(**overrides) -> ExperimentConfig:
    """Fixed-space temporal-order study: N=64, K=16, M in {4..64} vs M=2^12."""
    rows = []
    problem = build_problem(ExperimentConfig())
    for scheme in ("MIL1", "MIL2", "EES"):
        for m in (4, 8, 16, 32, 64):
            d = 0
            if scheme in ("MIL1", "MIL2"):
                alg = "ALG1" if scheme == "MIL1" else "ALG2"
                d = choose_D(alg, m, 16, 1.0, problem.spectrum)
            rows.append(RunSpec(scheme=scheme, N=64, M=m, K=16, D=d))
    base = ExperimentConfig(rows=tuple(rows), ref_N=64, ref_K=16, ref_M=1 << 12,
                            schemes=("MIL1", "MIL2", "EES"))
    return replace(base, **overrides)


def build_problem(config: ExperimentConfig) -> SpdeProblem:
    if config.family != "example":
        raise ConfigError(f"unknown problem family {config.family!r}", anchor="$.problem.family")
    return example_problem(epsilon=config.epsilon, p=config.p)


def _limit_cost_params(problem: SpdeProblem, scheme: str, q_override: Optional[float] = None) -> CostParams:
    """Cost parameters of the problem with the epsilon shift removed.

    The example instance sits epsilon inside the admissible boundary; cost
    exponents and resolution ratios are evaluated at the boundary limit so
    that the derived ladders hit exact relations like M = N^2.
    """
    pr = problem.params
    eps = problem.epsilon
    gamma = pr.gamma + eps
    alpha = pr.alpha + eps
    if q_override is not None:
        q = q_override
    elif scheme == "EES":
        q = pr.q_ees
    else:
        q = min(2.0 * (gamma - pr.beta), gamma)
    return CostParams(gamma=gamma, beta=pr.beta, alpha=alpha,
                      rho_A=problem.basis.rho_A, rho_Q=problem.spectrum.rho_Q, q=q)


def derive_ladder(config: ExperimentConfig, problem: SpdeProblem) -> tuple:
    """RunSpecs for every (scheme, N) pair of the configured ladder.

    M and K follow the cost-optimal exponent ratios of the scheme's matched
    case; the series depth D follows the step-count selection rule at
    temporal order ``config.d_q``.
    """
    if config.rows is not None:
        return tuple(config.rows)
    specs = []
    for scheme in config.schemes:
        case = "EES" if scheme == "EES" else "STANDARD"
        params = _limit_cost_params(problem, scheme)
        e_m, e_n, e_k = choice_exponents(case, params)
        for n in config.ladder:
            m = power_snapped(n, e_m / e_n)
            k = ceil_snapped(float(n) ** (e_k / e_n))
            d = 0
            if scheme in ("MIL1", "MIL2"):
                alg = "ALG1" if scheme == "MIL1" else "ALG2"
                d = choose_D(alg, m, k, config.d_q, problem.spectrum)
            specs.append(RunSpec(scheme=scheme, N=n, M=m, K=k, D=d))
    return tuple(specs)


@dataclass(frozen=True)
class ExperimentRow:
    """Aggregated result of one (scheme, resolution) row."""

    scheme: str
    N: int
    M: int
    K: int
    D: int
    cost_caption: float
    cost_dominant: float
    cost_primitives: float
    error: float
    std: float
    std_per_path: float
    std_mean_sq: float
    wall_time: float

    @property
    def cost(self) -> float:
        """Cost coordinate used for plotting and EOC fitting (dominant terms)."""
        return self.cost_dominant


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple
    manifest: dict
    sq_errors: np.ndarray  # (n_rows, paths) per-path squared errors


def _predicted_draws(specs, config: ExperimentConfig, m_fine: int) -> int:
    per_path = m_fine * config.ref_K
    for s in specs:
        per_path += s.M * costmodel.step_normal_draws(s.scheme, s.K, s.D)
    per_path += config.ref_M * costmodel.step_normal_draws(config.ref_scheme, config.ref_K, 0)
    return per_path * config.paths


def _error_sq(final_scheme: np.ndarray, final_ref: np.ndarray, norm: str) -> float:
    n_s, n_r = final_scheme.shape[0], final_ref.shape[0]
    if norm == "scheme-span":
        n = min(n_s, n_r)
        diff = final_scheme[:n] - final_ref[:n]
        return float(diff @ diff)
    n = max(n_s, n_r)
    diff = np.zeros(n)
    diff[:n_s] = final_scheme
    diff[:n_r] -= final_ref
    return float(diff @ diff)


def _sup_error_sq(scheme_states: np.ndarray, ref_states: np.ndarray, norm: str) -> float:
    """Largest squared deviation over the common grid (states as rows)."""
    n_s, n_r = scheme_states.shape[1], ref_states.shape[1]
    if norm == "scheme-span":
        n = min(n_s, n_r)
        diff = scheme_states[:, :n] - ref_states[:, :n]
        return float(np.max(np.sum(diff * diff, axis=1)))
    n = max(n_s, n_r)
    sq = np.zeros(scheme_states.shape[0])
    joint = min(n_s, n_r)
    diff = scheme_states[:, :joint] - ref_states[:, :joint]
    sq += np.sum(diff * diff, axis=1)
    if n_s > joint:
        sq += np.sum(scheme_states[:, joint:] ** 2, axis=1)
    if n_r > joint:
        sq += np.sum(ref_states[:, joint:] ** 2, axis=1)
    return float(np.max(sq))


def _path_errors(config: ExperimentConfig, specs, m_fine: int, path_index: int):
    """Squared errors of every row on one coupled path (one worker unit)."""
    problem = build_problem(config)
    sup_mode = config.error_functional == "sup-grid"
    fine = sample_fine_path(config.seed, path_index, m_fine, config.ref_K, problem.T)
    fine_totals = fine.increments.sum(axis=0)

    ref_cfg = SchemeConfig(kind=config.ref_scheme, N=config.ref_N, K=config.ref_K,
                           M=config.ref_M, problem=problem)
    ref = run_trajectory(ref_cfg, fine, return_path=sup_mode)
    _audit_coupling(ref.column_totals, fine_totals, config.ref_K)

    out = np.empty(len(specs))
    times = np.empty(len(specs))
    for idx, s in enumerate(specs):
        t0 = time.time()
        cfg = SchemeConfig(kind=s.scheme, N=s.N, K=s.K, M=s.M, problem=problem, D=s.D)
        res = run_trajectory(cfg, fine, return_path=sup_mode)
        _audit_coupling(res.column_totals, fine_totals, s.K)
        if sup_mode:
            common = math.gcd(s.M, config.ref_M)
            scheme_states = res.path[:: s.M // common]
            ref_states = ref.path[:: config.ref_M // common]
            out[idx] = _sup_error_sq(scheme_states, ref_states, config.error_norm)
        else:
            out[idx] = _error_sq(res.final.coeffs, ref.final.coeffs, config.error_norm)
        times[idx] = time.time() - t0
    return out, times


def _audit_coupling(column_totals: np.ndarray, fine_totals: np.ndarray, k: int) -> None:
    # identical aggregated increments across runs: block sums must telescope
    ref = fine_totals[:k]
    tol = 1e-9 * (1.0 + float(np.max(np.abs(ref))))
    if np.max(np.abs(column_totals - ref)) > tol:
        raise AssertionError("coupling violation: aggregated increments do not telescope")


def _worker_count(config: ExperimentConfig) -> int:
    if config.workers > 0:
        return config.workers
    env = os.environ.get("SPDEMIL_WORKERS", "").strip()
    return max(1, int(env)) if env else 1


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every configured row over coupled paths and aggregate the table.

    Per path: sample one finest-grid table, run the reference once, run every
    row on aggregated increments, and record squared endpoint (or sup-grid)
    errors. A resource guard rejects configurations whose predicted
    standard-normal demand exceeds ``draw_ceiling``.
    """
    problem = build_problem(config)
    specs = derive_ladder(config, problem)
    if not specs:
        raise ConfigError("experiment has no rows")
    for s in specs:
        if s.K > config.ref_K:
            raise ConfigError(f"row {s} uses K beyond the reference K={config.ref_K}")
    m_fine = config.ref_M
    for s in specs:
        m_fine = math.lcm(m_fine, s.M)
    if m_fine > max(config.ref_M, max(s.M for s in specs)) * 64:
        raise ConfigError("step counts have no small common refinement; adjust the ladder")
    predicted = _predicted_draws(specs, config, m_fine)
    if predicted > config.draw_ceiling:
        raise ResourceLimitError(
            f"predicted {predicted:.3e} normal draws exceed the ceiling {config.draw_ceiling:.3e}"
        )

    t0 = time.time()
    workers = _worker_count(config)
    sq = np.empty((len(specs), config.paths))
    row_times = np.zeros(len(specs))
    if workers == 1:
        for pidx in range(config.paths):
            sq[:, pidx], elapsed = _path_errors(config, specs, m_fine, pidx)
            row_times += elapsed
    else:
        import multiprocessing as mp

        with mp.get_context("spawn").Pool(workers) as pool:
            jobs = [(config, specs, m_fine, p) for p in range(config.paths)]
            for pidx, (errs, elapsed) in enumerate(pool.starmap(_path_errors, jobs)):
                sq[:, pidx] = errs
                row_times += elapsed
    wall = time.time() - t0

    rows = []
    for idx, s in enumerate(specs):
        err_sq = sq[idx]
        rms = math.sqrt(float(np.mean(err_sq)))
        per_path_err = np.sqrt(err_sq)
        n_batches = min(20, config.paths)
        batches = np.array_split(err_sq, n_batches)
        batch_rms = np.array([math.sqrt(float(np.mean(b))) for b in batches])
        std_batch = float(np.std(batch_rms, ddof=1)) if n_batches > 1 else 0.0
        std_pp = float(np.std(per_path_err, ddof=1)) if config.paths > 1 else 0.0
        std_mean_sq = (float(np.std(err_sq, ddof=1)) / math.sqrt(config.paths)
                       if config.paths > 1 else 0.0)
        cost = total_cost(s.scheme, s.M, s.N, s.K, D=s.D or None, q=config.cost_q)
        rows.append(ExperimentRow(
            scheme=s.scheme, N=s.N, M=s.M, K=s.K, D=s.D,
            cost_caption=float(cost.caption), cost_dominant=float(cost.dominant),
            cost_primitives=float(cost.primitives),
            error=rms, std=std_batch, std_per_path=std_pp, std_mean_sq=std_mean_sq,
            wall_time=row_times[idx],
        ))
    rows.sort(key=lambda r: (r.scheme, r.N))

    from . import __version__
    from ._engine import BACKEND

    manifest = {
        "config": _config_to_dict(config),
        "m_fine": m_fine,
        "rows": [asdict(r) for r in rows],
        "seed": config.seed,
        "d_values": {f"{s.scheme}-N{s.N}": s.D for s in specs if s.D},
        "predicted_normal_draws": predicted,
        "wall_time_total": wall,
        "workers": workers,
        "engine_backend": BACKEND,
        "versions": {"spdemil": __version__, "numpy": np.__version__},
        "std_conventions": {
            "std": "sample std of per-batch RMS over up to 20 path batches",
            "std_per_path": "sample std of per-path endpoint errors",
            "std_mean_sq": "std of the mean-squared-error estimator",
        },
    }
    return ExperimentResult(rows=tuple(rows), manifest=manifest, sq_errors=sq)


@dataclass(frozen=True)
class EocFit:
    slope: float
    two_point_slope: float


def fit_eoc(rows) -> EocFit:
    """Log-log slope of error against cost for one scheme's rows.

    Returns the least-squares slope over all rows and the slope through the
    two finest (largest-cost) rows. Equal costs are rejected.
    """
    rows = sorted(rows, key=lambda r: r.cost)
    if len(rows) < 2:
        raise ValueError("need at least two rows to fit a slope")
    if len({r.scheme for r in rows}) != 1:
        raise ValueError("fit rows must belong to a single scheme")
    costs = [r.cost for r in rows]
    errors = [r.error for r in rows]
    if len(set(costs)) != len(costs):
        raise ValueError("degenerate fit: repeated cost values")
    slope = fit_loglog(costs, errors)
    two = (math.log(errors[-1]) - math.log(errors[-2])) / (math.log(costs[-1]) - math.log(costs[-2]))
    return EocFit(slope=slope, two_point_slope=two)


# ---------------------------------------------------------------------------
# configuration parsing and output emission


_TOP_KEYS = {
    "problem", "schemes", "ladder", "rows", "paths", "reference", "seed",
    "error_functional", "error_norm", "d_q", "cost_q", "draw_ceiling", "workers",
}
_PROBLEM_KEYS = {"family", "epsilon", "p"}
_REFERENCE_KEYS = {"scheme", "N", "K", "M"}
_ROW_KEYS = {"scheme", "N", "M", "K", "D"}


def _reject_unknown(mapping: dict, allowed: set, anchor: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} (allowed: {sorted(allowed)})",
                              anchor=f"{anchor}.{key}")


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a JSON-shaped document against the strict config schema."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be an object", anchor="$")
    _reject_unknown(doc, _TOP_KEYS, "$")
    kwargs = {}
    problem = doc.get("problem", {})
    if not isinstance(problem, dict):
        raise ConfigError("problem must be an object", anchor="$.problem")
    _reject_unknown(problem, _PROBLEM_KEYS, "$.problem")
    if "family" in problem:
        kwargs["family"] = problem["family"]
    if "epsilon" in problem:
        kwargs["epsilon"] = float(problem["epsilon"])
    if "p" in problem:
        kwargs["p"] = float(problem["p"])
    if "schemes" in doc:
        kwargs["schemes"] = tuple(doc["schemes"])
    if "ladder" in doc:
        ladder = doc["ladder"]
        if not isinstance(ladder, list) or not all(isinstance(n, int) and n >= 1 for n in ladder):
            raise ConfigError("ladder must be a list of positive integers", anchor="$.ladder")
        kwargs["ladder"] = tuple(ladder)
    if "rows" in doc:
        specs = []
        for i, row in enumerate(doc["rows"]):
            anchor = f"$.rows[{i}]"
            if not isinstance(row, dict):
                raise ConfigError("row must be an object", anchor=anchor)
            _reject_unknown(row, _ROW_KEYS, anchor)
            try:
                specs.append(RunSpec(scheme=row["scheme"], N=int(row["N"]), M=int(row["M"]),
                                     K=int(row["K"]), D=int(row.get("D", 0))))
            except KeyError as missing:
                raise ConfigError(f"row is missing key {missing}", anchor=anchor) from None
        kwargs["rows"] = tuple(specs)
    if "reference" in doc:
        ref = doc["reference"]
        if not isinstance(ref, dict):
            raise ConfigError("reference must be an object", anchor="$.reference")
        _reject_unknown(ref, _REFERENCE_KEYS, "$.reference")
        kwargs["ref_scheme"] = ref.get("scheme", "LIE")
        if "N" in ref:
            kwargs["ref_N"] = int(ref["N"])
        if "K" in ref:
            kwargs["ref_K"] = int(ref["K"])
        if "M" in ref:
            kwargs["ref_M"] = int(ref["M"])
    for key, cast in (("paths", int), ("seed", int), ("error_functional", str),
                      ("error_norm", str), ("d_q", float), ("cost_q", float),
                      ("draw_ceiling", int), ("workers", int)):
        if key in doc:
            kwargs[key] = cast(doc[key])
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), anchor="$") from exc


def load_config(path: str) -> ExperimentConfig:
    """Parse a config file, anchoring syntax errors to line:column."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, anchor=f"{path}:{exc.lineno}:{exc.colno}") from exc
    return parse_config(doc)


def _config_to_dict(config: ExperimentConfig) -> dict:
    out = asdict(config)
    if config.rows is not None:
        out["rows"] = [asdict(r) for r in config.rows]
    out["schemes"] = list(config.schemes)
    out["ladder"] = list(config.ladder)
    return out


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_outputs(result: ExperimentResult, out_dir: str) -> dict:
    """Emit rows.csv, plot.csv and manifest.json; returns the file paths."""
    os.makedirs(out_dir, exist_ok=True)
    rows_path = os.path.join(out_dir, "rows.csv")
    with open(rows_path, "w", encoding="utf-8") as fh:
        fh.write("scheme,N,M,K,D,cost_caption,cost_primitives,error,std\n")
        for r in result.rows:
            fh.write(",".join(_fmt(v) for v in (
                r.scheme, r.N, r.M, r.K, r.D, r.cost_caption, r.cost_primitives,
                r.error, r.std)) + "\n")
    plot_path = os.path.join(out_dir, "plot.csv")
    with open(plot_path, "w", encoding="utf-8") as fh:
        fh.write("scheme,cost,error\n")
        for r in result.rows:
            fh.write(f"{r.scheme},{_fmt(r.cost)},{_fmt(r.error)}\n")
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(result.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"rows": rows_path, "plot": plot_path, "manifest": manifest_path}
