import math
from dataclasses import replace

import numpy as np
import pytest

import spdemil.schemes as schemes_mod
from spdemil.iterints import IterIntBatch
from spdemil.noise import FinePath, aggregate, q_increment, sample_fine_path
from spdemil.operators import example_problem
from spdemil.schemes import (SchemeConfig, run_trajectory, step_ees, step_lie,
                             step_mil, step_normal_draws)
from spdemil.spectral import GalerkinState

PROBLEM = example_problem()
L1 = 0.09869604401089357  # pi^2/100
FIRST_STEP_H025 = 0.21959343015261865  # exp(-L1/4) * 0.25 * 2 sqrt(2)/pi


def _zero_drift_problem():
    return replace(PROBLEM,
                   drift_rule=lambda c: np.zeros_like(c),
                   mu_rule=lambda i, j, y: 0.0,
                   phi_rule=lambda i, j, k, y: 0.0,
                   linear_family=None, drift_affine=None, family_tag="frozen")


def test_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig(kind="XXX", N=2, K=2, M=2, problem=PROBLEM)
    with pytest.raises(ValueError):
        SchemeConfig(kind="EES", N=0, K=2, M=2, problem=PROBLEM)
    with pytest.raises(ValueError):
        SchemeConfig(kind="MIL1", N=2, K=2, M=2, problem=PROBLEM)  # D missing


def test_step_draw_budgets():
    assert step_normal_draws("EES", 3, 0) == 3
    assert step_normal_draws("MIL1", 3, 5) == 3 * 11
    assert step_normal_draws("MIL2", 3, 5) == 3 * 11 + 3


def test_ees_equals_mil_with_zero_integrals():
    cfg = SchemeConfig(kind="MIL1", N=4, K=2, M=8, problem=PROBLEM, D=2)
    state = GalerkinState(np.array([0.4, -0.1, 0.2, 0.05]))
    q = np.array([0.03, -0.07])
    zero = IterIntBatch(values=np.zeros((2, 2)), h=cfg.h, D=2, algorithm="ALG1")
    a = step_mil(cfg, state, q, zero)
    b = step_ees(replace(cfg, kind="EES", D=0), state, q)
    assert np.array_equal(a.coeffs, b.coeffs)


def test_pure_semigroup_decay_without_forcing():
    prob = _zero_drift_problem()
    cfg = SchemeConfig(kind="EES", N=3, K=2, M=4, problem=prob)
    state = GalerkinState(np.array([1.0, -2.0, 0.5]))
    out = step_ees(cfg, state, np.zeros(2))
    lam = prob.basis.lambdas(3)
    assert np.allclose(out.coeffs, np.exp(-lam * cfg.h) * state.coeffs, rtol=1e-15)


def test_first_step_from_zero_initial_state():
    # noise terms vanish because the diffusion family is linear in the state
    cfg = SchemeConfig(kind="MIL1", N=2, K=2, M=4, problem=PROBLEM, D=1)
    state = GalerkinState(np.zeros(2))
    q = np.array([0.9, -1.3])  # arbitrary: multiplied by B(0) = 0
    ivals = IterIntBatch(values=np.array([[0.2, 0.1], [0.4, -0.3]]), h=cfg.h, D=1,
                         algorithm="ALG1")
    out = step_mil(cfg, state, q, ivals)
    assert out.coeffs[0] == pytest.approx(FIRST_STEP_H025, rel=1e-13)
    assert out.coeffs[1] == 0.0  # even drift coefficient vanishes


def test_lie_scalar_resolvent_limit():
    prob = _zero_drift_problem()
    lam = prob.basis.lambdas(1)[0]
    errs = []
    for m in (8, 64, 512):
        cfg = SchemeConfig(kind="LIE", N=1, K=1, M=m, problem=prob)
        state = GalerkinState(np.array([1.0]))
        for _ in range(m):
            state = step_lie(cfg, state, np.zeros(1))
        assert state.coeffs[0] == pytest.approx((1.0 + lam / m) ** (-m), rel=1e-12)
        errs.append(abs(state.coeffs[0] - math.exp(-lam)))
    assert errs[0] > errs[1] > errs[2]


def test_lie_matches_ees_to_second_order_per_step():
    prob = _zero_drift_problem()
    state = GalerkinState(np.array([1.0, 1.0, 1.0, 1.0]))
    diffs = []
    for m in (16, 32):
        cfg = SchemeConfig(kind="LIE", N=4, K=1, M=m, problem=prob)
        a = step_lie(cfg, state, np.zeros(1))
        b = step_ees(replace(cfg, kind="EES"), state, np.zeros(1))
        diffs.append(np.max(np.abs(a.coeffs - b.coeffs)))
    # halving h shrinks the per-step gap by ~4
    assert diffs[1] < diffs[0] / 3.0


def test_first_lie_step_is_resolvent_of_drift():
    cfg = SchemeConfig(kind="LIE", N=3, K=2, M=8, problem=PROBLEM)
    out = step_lie(cfg, GalerkinState(np.zeros(3)), np.zeros(2))
    lam = PROBLEM.basis.lambdas(3)
    expected = (1.0 / (1.0 + lam * cfg.h)) * cfg.h * PROBLEM.drift_rule(np.zeros(3))
    assert np.allclose(out.coeffs, expected, rtol=1e-14)


def test_step_rejects_dimension_mismatch():
    cfg = SchemeConfig(kind="EES", N=4, K=2, M=8, problem=PROBLEM)
    with pytest.raises(ValueError):
        step_ees(cfg, GalerkinState(np.zeros(3)), np.zeros(2))
    with pytest.raises(ValueError):
        step_ees(cfg, GalerkinState(np.zeros(4)), np.zeros(3))


def test_single_step_trajectory_matches_step_op():
    fp = sample_fine_path(3, 0, 8, 2, 1.0)
    cfg = SchemeConfig(kind="EES", N=4, K=2, M=1, problem=PROBLEM)
    res = run_trajectory(cfg, fp)
    inc = aggregate(fp, 1)[0, :2]
    manual = step_ees(cfg, GalerkinState(np.zeros(4)), q_increment(inc, PROBLEM.spectrum, 2))
    assert np.allclose(res.final.coeffs, manual.coeffs, rtol=1e-12)


def test_trajectory_requires_compatible_grid():
    fp = sample_fine_path(3, 0, 8, 2, 1.0)
    with pytest.raises(ValueError):
        run_trajectory(SchemeConfig(kind="EES", N=2, K=2, M=3, problem=PROBLEM), fp)
    with pytest.raises(ValueError):
        run_trajectory(SchemeConfig(kind="EES", N=2, K=3, M=2, problem=PROBLEM), fp)


def test_coupling_invariant_under_depth_changes():
    fp = sample_fine_path(17, 0, 64, 2, 1.0)
    totals = {}
    for d in (2, 9):
        cfg = SchemeConfig(kind="MIL1", N=4, K=2, M=16, problem=PROBLEM, D=d)
        res = run_trajectory(cfg, fp)
        totals[d] = res.column_totals
    assert np.array_equal(totals[2], totals[9])
    ees = run_trajectory(SchemeConfig(kind="EES", N=4, K=2, M=16, problem=PROBLEM), fp)
    assert np.array_equal(ees.column_totals, totals[2])


def test_mil2_equals_mil1_when_tail_suppressed(monkeypatch):
    fp = sample_fine_path(23, 0, 32, 3, 1.0)
    monkeypatch.setattr(schemes_mod, "tail_from_normals",
                        lambda b, h, a_d, z: np.zeros(z.shape[:-1] + (b.shape[-1],) * 2))
    r1 = run_trajectory(SchemeConfig(kind="MIL1", N=6, K=3, M=8, problem=PROBLEM, D=4), fp)
    r2 = run_trajectory(SchemeConfig(kind="MIL2", N=6, K=3, M=8, problem=PROBLEM, D=4), fp)
    assert np.allclose(r1.final.coeffs, r2.final.coeffs, rtol=1e-15)


def test_modewise_contraction_without_noise():
    # drift -y, diffusion off: every stepper must contract each mode
    prob = replace(PROBLEM,
                   drift_rule=lambda c: -c,
                   mu_rule=lambda i, j, y: 0.0,
                   phi_rule=lambda i, j, k, y: 0.0,
                   linear_family=None, drift_affine=None,
                   family_tag="contraction")
    zero_path = FinePath(increments=np.zeros((32, 2)), T=1.0, seed=0)
    start = np.array([1.0, -0.5, 0.25, 2.0])
    prob = replace(prob, initial_rule=lambda n: start[:n].copy())
    for kind in ("EES", "LIE", "MIL1"):
        cfg = SchemeConfig(kind=kind, N=4, K=2, M=32, problem=prob,
                           D=1 if kind == "MIL1" else 0)
        res = run_trajectory(cfg, zero_path, master_seed=1, path_index=0, return_path=True)
        mags = np.abs(res.path)
        assert np.all(np.diff(mags, axis=0) <= 1e-15)


def test_trajectory_draw_accounting(monkeypatch):
    consumed = {"series": 0, "tail": 0}
    real_derive = schemes_mod.derive_stream

    class CountingStream:
        def __init__(self, inner, purpose):
            self._inner = inner
            self._purpose = purpose

        def standard_normal(self, shape=None):
            out = self._inner.standard_normal(shape)
            consumed[self._purpose] += int(np.prod(out.shape)) if hasattr(out, "shape") else 1
            return out

    def counting_derive(seed, path, purpose, step=0):
        inner = real_derive(seed, path, purpose, step)
        if purpose == schemes_mod.SERIES:
            return CountingStream(inner, "series")
        if purpose == schemes_mod.TAIL:
            return CountingStream(inner, "tail")
        return inner

    monkeypatch.setattr(schemes_mod, "derive_stream", counting_derive)
    fp = sample_fine_path(29, 0, 32, 3, 1.0)
    m, k, d = 8, 3, 5
    res = run_trajectory(SchemeConfig(kind="MIL2", N=6, K=k, M=m, problem=PROBLEM, D=d), fp)
    assert consumed["series"] == m * 2 * k * d
    assert consumed["tail"] == m * (k * (k - 1) // 2)
    assert res.normal_draws_per_step == step_normal_draws("MIL2", k, d)
    assert res.normal_draws_total == m * step_normal_draws("MIL2", k, d)


def test_fast_and_generic_paths_agree():
    fp = sample_fine_path(31, 0, 64, 3, 1.0)
    generic = replace(PROBLEM, linear_family=None, drift_affine=None)
    for kind, d in (("LIE", 0), ("EES", 0), ("MIL1", 3), ("MIL2", 3)):
        fast_cfg = SchemeConfig(kind=kind, N=6, K=3, M=16, problem=PROBLEM, D=d)
        slow_cfg = SchemeConfig(kind=kind, N=6, K=3, M=16, problem=generic, D=d)
        a = run_trajectory(fast_cfg, fp)
        b = run_trajectory(slow_cfg, fp)
        assert b.backend == "generic"
        assert np.allclose(a.final.coeffs, b.final.coeffs, rtol=1e-11, atol=1e-14)


def test_return_path_endpoints():
    fp = sample_fine_path(37, 0, 16, 2, 1.0)
    cfg = SchemeConfig(kind="EES", N=4, K=2, M=16, problem=PROBLEM)
    res = run_trajectory(cfg, fp, return_path=True)
    assert res.path.shape == (17, 4)
    assert np.array_equal(res.path[0], np.zeros(4))
    assert np.array_equal(res.path[-1], res.final.coeffs)


def test_temporal_order_smoke():
    # fixed space (N = N_ref), coarse-M ladder against a fine implicit-Euler reference
    seeds = range(24)
    ms = (4, 16, 64)
    errs = {m: [] for m in ms}
    for seed in seeds:
        fp = sample_fine_path(101, seed, 1024, 4, 1.0)
        ref = run_trajectory(SchemeConfig(kind="LIE", N=16, K=4, M=1024, problem=PROBLEM), fp)
        for m in ms:
            cfg = SchemeConfig(kind="MIL1", N=16, K=4, M=m, problem=PROBLEM, D=m)
            res = run_trajectory(cfg, fp)
            errs[m].append(float(np.sum((res.final.coeffs - ref.final.coeffs) ** 2)))
    rms = [math.sqrt(float(np.mean(errs[m]))) for m in ms]
    slope = -(math.log(rms[-1]) - math.log(rms[0])) / (math.log(ms[-1]) - math.log(ms[0]))
    assert slope > 0.6
