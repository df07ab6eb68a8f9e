import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spdemil.spectral import (EigenBasis, GalerkinState, dirichlet_laplacian_basis,
                              evaluate_sine_state, fractional_norm, project,
                              resolvent_factors, semigroup_factors)

BASIS = dirichlet_laplacian_basis()  # lambda_i = pi^2 i^2 / 100

# frozen scalar-evaluation oracles
EXP_L1 = 0.906018055788923  # exp(-pi^2/100)
RES_TINY = 0.9999984940201512  # 1/(1 + (pi^2/100) 2^-16)
L1 = 0.09869604401089357  # pi^2/100


def test_semigroup_identity_at_zero_step():
    assert semigroup_factors(BASIS, 1, 0.0) == pytest.approx([1.0], abs=0.0)


def test_semigroup_scalar_value():
    out = semigroup_factors(BASIS, 1, 1.0)
    assert out[0] == pytest.approx(EXP_L1, rel=1e-15)


def test_semigroup_strictly_decreasing_in_mode():
    out = semigroup_factors(BASIS, 12, 0.5)
    assert np.all(np.diff(out) < 0.0)
    assert np.all((out > 0.0) & (out <= 1.0))


def test_semigroup_upper_bound():
    h = 0.3
    out = semigroup_factors(BASIS, 9, h)
    assert np.all(out <= math.exp(-h * BASIS.lambdas(9).min()) + 1e-16)


@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_semigroup_law(h1, h2):
    a = semigroup_factors(BASIS, 6, h1) * semigroup_factors(BASIS, 6, h2)
    b = semigroup_factors(BASIS, 6, h1 + h2)
    assert np.allclose(a, b, rtol=1e-12, atol=0.0)


@pytest.mark.parametrize("bad_h", [-1.0, float("nan"), float("inf")])
def test_semigroup_rejects_bad_step(bad_h):
    with pytest.raises(ValueError):
        semigroup_factors(BASIS, 3, bad_h)


def test_semigroup_rejects_zero_modes():
    with pytest.raises(ValueError):
        semigroup_factors(BASIS, 0, 0.1)


def test_resolvent_direct_substitution():
    unit = EigenBasis(lambda_rule=lambda i: np.ones_like(np.asarray(i, dtype=float)), rho_A=1.0)
    assert resolvent_factors(unit, 1, 1.0) == pytest.approx([0.5], abs=0.0)


def test_resolvent_tiny_step_value():
    out = resolvent_factors(BASIS, 1, 2.0**-16)
    assert out[0] == pytest.approx(RES_TINY, rel=1e-15)


def test_resolvent_dominates_semigroup():
    # exp(-x) <= 1/(1+x) entrywise for x >= 0
    for h in (1e-4, 0.1, 1.0, 7.0):
        assert np.all(resolvent_factors(BASIS, 8, h) >= semigroup_factors(BASIS, 8, h))


def test_resolvent_rejects_nonpositive_step():
    with pytest.raises(ValueError):
        resolvent_factors(BASIS, 3, 0.0)


def test_fractional_norm_examples():
    assert fractional_norm(GalerkinState([1.0, 0.0]), BASIS, 0.0) == 1.0
    assert fractional_norm(GalerkinState([1.0]), BASIS, 1.0) == pytest.approx(L1, rel=1e-15)
    assert fractional_norm(GalerkinState(np.zeros(5)), BASIS, 2.3) == 0.0


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=12))
def test_fractional_norm_r_zero_is_euclidean(coeffs):
    state = GalerkinState(np.asarray(coeffs))
    assert fractional_norm(state, BASIS, 0.0) == float(np.linalg.norm(state.coeffs))


def test_fractional_norm_rejects_negative_order():
    with pytest.raises(ValueError):
        fractional_norm(GalerkinState([1.0]), BASIS, -0.1)


def test_project_truncates_and_pads():
    assert np.array_equal(project(GalerkinState([1.0, 2.0, 3.0]), 2).coeffs, [1.0, 2.0])
    assert np.array_equal(project(GalerkinState([1.0, 2.0]), 4).coeffs, [1.0, 2.0, 0.0, 0.0])


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=9), st.integers(0, 12))
def test_project_idempotent(coeffs, n_target):
    once = project(GalerkinState(np.asarray(coeffs)), n_target)
    twice = project(once, n_target)
    assert np.array_equal(once.coeffs, twice.coeffs)


def test_state_rejects_non_finite():
    with pytest.raises(ValueError):
        GalerkinState([1.0, float("nan")])


def test_sine_diagnostic_matches_single_mode():
    state = GalerkinState([0.0, 1.0])
    x = np.array([0.25, 0.5])
    expected = math.sqrt(2.0) * np.sin(2.0 * np.pi * x)
    assert np.allclose(evaluate_sine_state(state, x), expected, rtol=1e-14)
