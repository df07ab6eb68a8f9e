"""Command-line interface.

Subcommands: ``simulate`` (run a configured experiment), ``table`` /
``plot-data`` (reproduce the built-in experiment at desk or full scale),
``select`` / ``eoc`` / ``resolution`` (cost-model queries) and
``iterint-test`` (iterated-integral moment and rate tables). Exit codes:
0 on success, 2 for malformed configuration, 3 when the resource guard
rejects the run.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .costmodel import (CostParams, EOC_CASES, check_conditions, eoc,
                        optimal_resolution, select_scheme)
from .errors import ConfigError, ResourceLimitError
from .harness import (desk_config, fit_eoc, full_config, load_config,
                      run_experiment, write_outputs)
from .iterints import measure_rmse, sample_unconditional, tail_sum_scale
from .noise import cubic_decay_spectrum, derive_stream

# defaults: the shipped example instance, epsilon inside its admissible boundary
_EPS = 1e-6
_EXAMPLE = {"gamma": 1.0 - _EPS, "beta": 0.0, "alpha": 7.0 / 3.0 - _EPS, "rhoA": 2.0, "rhoQ": 3.0}


def _param_flags(sub, with_q=False):
    sub.add_argument("--gamma", type=float, default=_EXAMPLE["gamma"])
    sub.add_argument("--beta", type=float, default=_EXAMPLE["beta"])
    sub.add_argument("--alpha", type=float, default=_EXAMPLE["alpha"])
    sub.add_argument("--rhoA", type=float, default=_EXAMPLE["rhoA"])
    sub.add_argument("--rhoQ", type=float, default=_EXAMPLE["rhoQ"])
    sub.add_argument("--c", type=float, default=1.0)
    if with_q:
        sub.add_argument("--q", type=float, default=None,
                         help="override the Milstein temporal order")


def _cost_params(args):
    q_mil = args.q if getattr(args, "q", None) is not None else min(
        2.0 * (args.gamma - args.beta), args.gamma)
    q_ees = min(0.5, q_mil)
    common = dict(gamma=args.gamma, beta=args.beta, alpha=args.alpha,
                  rho_A=args.rhoA, rho_Q=args.rhoQ, c=args.c)
    return CostParams(q=q_mil, **common), CostParams(q=q_ees, **common)


def _run_and_emit(config, out_dir, quiet=False):
    result = run_experiment(config)
    paths = write_outputs(result, out_dir) if out_dir else None
    if not quiet:
        header = f"{'scheme':>6} {'N':>4} {'M':>8} {'K':>3} {'D':>6} {'cost':>12} {'error':>12} {'std':>12}"
        print(header)
        for r in result.rows:
            print(f"{r.scheme:>6} {r.N:>4} {r.M:>8} {r.K:>3} {r.D:>6} "
                  f"{r.cost_dominant:>12.6g} {r.error:>12.5e} {r.std:>12.5e}")
        for scheme in sorted({r.scheme for r in result.rows}):
            rows = [r for r in result.rows if r.scheme == scheme]
            if len(rows) >= 2:
                fit = fit_eoc(rows)
                print(f"# {scheme}: fitted EOC slope {fit.slope:+.4f}, "
                      f"two-finest-points {fit.two_point_slope:+.4f}")
        if paths:
            print(f"# outputs: {paths['rows']}, {paths['plot']}, {paths['manifest']}")
    return result


def _cmd_simulate(args):
    config = load_config(args.config)
    overrides = {}
    if args.paths is not None:
        overrides["paths"] = args.paths
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
    _run_and_emit(config, args.out)
    return 0


def _cmd_table(args):
    maker = full_config if args.full else desk_config
    overrides = {}
    if args.paths is not None:
        overrides["paths"] = args.paths
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    _run_and_emit(maker(**overrides), args.out)
    return 0


def _cmd_plot_data(args):
    maker = full_config if args.full else desk_config
    overrides = {}
    if args.paths is not None:
        overrides["paths"] = args.paths
    if args.seed is not None:
        overrides["seed"] = args.seed
    result = _run_and_emit(maker(**overrides), args.out, quiet=True)
    print("scheme,cost,error")
    for r in result.rows:
        print(f"{r.scheme},{r.cost:.17g},{r.error:.17g}")
    return 0


def _cmd_select(args):
    p_mil, p_ees = _cost_params(args)
    report = select_scheme(p_mil, p_ees)
    print(f"optimal scheme: {report.optimal}")
    print(f"matched rule:   {report.rule}")
    print(f"EOC:            {report.eoc_value:.12g}  (case {report.eoc_case})")
    e_m, e_n, e_k = report.exponents
    print(f"exponents:      e_M={e_m:.12g} e_N={e_n:.12g} e_K={e_k:.12g}")
    print("conditions:     " + ", ".join(f"{k}={v}" for k, v in report.flags.as_dict().items()))
    print("cost regimes:   " + ", ".join(f"{k}: {v}" for k, v in report.cost_regime.items()))
    print("per-scheme EOC: " + ", ".join(
        f"{k}: {v:.12g}" if v is not None else f"{k}: n/a"
        for k, v in report.eoc_per_scheme.items()))
    return 0


def _cmd_eoc(args):
    p_mil, p_ees = _cost_params(args)
    print(f"q_MIL={p_mil.q:.12g} q_EES={p_ees.q:.12g} "
          f"gamma*rho_A={p_mil.g:.12g} alpha*rho_Q={p_mil.a:.12g}")
    for case in EOC_CASES:
        params = p_ees if case == "EES" else p_mil
        print(f"{case:>9}: {eoc(case, params):.12g}")
    report = select_scheme(p_mil, p_ees)
    print(f"optimal: {report.optimal} (EOC {report.eoc_value:.12g})")
    return 0


def _cmd_resolution(args):
    p_mil, p_ees = _cost_params(args)
    report = select_scheme(p_mil, p_ees)
    params = p_ees if report.choice_case == "EES" else p_mil
    choice = optimal_resolution(report.choice_case, params, args.budget)
    print(f"case {choice.case}: M={choice.M} N={choice.N} K={choice.K} "
          f"(exponents e_M={choice.e_M:.12g} e_N={choice.e_N:.12g} e_K={choice.e_K:.12g})")
    return 0


def _cmd_iterint_test(args):
    spectrum = cubic_decay_spectrum()
    rng = derive_stream(args.seed, 0, 99)
    values, _ = sample_unconditional(args.alg, args.samples, args.h, args.D, args.K,
                                     spectrum, rng)
    eta = spectrum.etas(args.K)
    s_partial = (np.pi**2 / 6.0) - 2.0 * np.pi**2 / (args.h**2) * tail_sum_scale(args.h, args.D)
    print("i,j,mean,second_moment,exact_second_moment")
    for i in range(args.K):
        for j in range(args.K):
            scale = eta[i] * eta[j]
            if i == j:
                exact = scale * args.h**2 / 2.0
            elif args.alg == "ALG2":
                exact = scale * args.h**2 / 2.0
            else:
                exact = scale * (args.h**2 / 4.0 + 3.0 * args.h**2 / (2.0 * np.pi**2) * s_partial)
            mean = float(np.mean(values[:, i, j]))
            second = float(np.mean(values[:, i, j] ** 2))
            print(f"{i + 1},{j + 1},{mean:.10e},{second:.10e},{exact:.10e}")
    if args.rate:
        print("D,rmse")
        ladder = []
        d = 4
        while d <= args.D:
            ladder.append(d)
            d *= 4
        ref_d = max(16 * args.D, 256)
        for d in ladder:
            r = measure_rmse(args.alg, d, args.samples, args.h, args.K, spectrum,
                             args.seed, reference_D=ref_d)
            print(f"{d},{r:.10e}")
        if len(ladder) >= 2:
            slope = (math.log(r) - math.log(measure_rmse(
                args.alg, ladder[0], args.samples, args.h, args.K, spectrum,
                args.seed, reference_D=ref_d))) / (math.log(ladder[-1]) - math.log(ladder[0]))
            print(f"# fitted D-slope from endpoints: {slope:+.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spdemil", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="spdemil-out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("table", help="reproduce the built-in experiment table")
    p.add_argument("--full", action="store_true", help="published scale (tens of minutes)")
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_table)

    p = sub.add_parser("plot-data", help="emit the log-log plot CSV")
    p.add_argument("--full", action="store_true")
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_plot_data)

    p = sub.add_parser("select", help="evaluate the scheme-selection table")
    _param_flags(p, with_q=True)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("eoc", help="print all effective-order formula values")
    _param_flags(p, with_q=True)
    p.set_defaults(func=_cmd_eoc)

    p = sub.add_parser("resolution", help="optimal M, N, K under a cost budget")
    _param_flags(p, with_q=True)
    p.add_argument("--budget", type=float, required=True)
    p.set_defaults(func=_cmd_resolution)

    p = sub.add_parser("iterint-test", help="iterated-integral moment/rate tables")
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--D", type=int, default=64)
    p.add_argument("--alg", choices=("ALG1", "ALG2"), default="ALG2")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=20250810)
    p.add_argument("--rate", action="store_true", help="also emit an RMSE-vs-D ladder")
    p.set_defaults(func=_cmd_iterint_test)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ResourceLimitError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
