import io
import math

import numpy as np
import pytest

from spdemil.noise import (INCREMENTS, SERIES, TAIL, FinePath, QSpectrum, aggregate,
                           cubic_decay_spectrum, derive_stream, dump_fine_path,
                           load_fine_path, q_increment, sample_fine_path)

ZETA3 = 1.2020569031595943


def test_fine_path_moments():
    fp = sample_fine_path(123, 0, 50000, 2, 2.0)
    draws = fp.increments.ravel()
    sigma = math.sqrt(2.0 / 50000)
    assert abs(draws.mean()) < 4.0 * sigma / math.sqrt(draws.size)
    for j in range(2):
        var = fp.increments[:, j].var()
        assert abs(var / sigma**2 - 1.0) < 0.05


def test_fine_path_deterministic_and_path_indexed():
    a = sample_fine_path(7, 3, 64, 2, 1.0)
    b = sample_fine_path(7, 3, 64, 2, 1.0)
    c = sample_fine_path(7, 4, 64, 2, 1.0)
    assert np.array_equal(a.increments, b.increments)
    assert not np.array_equal(a.increments, c.increments)


def test_fine_path_rejects_bad_sizes():
    with pytest.raises(ValueError):
        sample_fine_path(1, 0, 0, 2, 1.0)
    with pytest.raises(ValueError):
        sample_fine_path(1, 0, 4, 2, 0.0)


def test_aggregate_full_collapse_and_identity():
    fp = sample_fine_path(9, 0, 4, 3, 1.0)
    collapsed = aggregate(fp, 1)
    assert np.allclose(collapsed[0], fp.increments.sum(axis=0), rtol=1e-15)
    assert np.array_equal(aggregate(fp, 4), fp.increments)


def test_aggregate_associativity_and_telescoping():
    fp = sample_fine_path(11, 0, 256, 2, 1.0)
    two_stage = aggregate(aggregate(fp, 8), 2)
    direct = aggregate(fp, 2)
    assert np.allclose(two_stage, direct, rtol=1e-12)
    assert np.allclose(direct.sum(axis=0), fp.increments.sum(axis=0), rtol=1e-12)


def test_aggregate_rejects_non_divisor():
    fp = sample_fine_path(2, 0, 10, 1, 1.0)
    with pytest.raises(ValueError):
        aggregate(fp, 3)


def test_q_increment_examples():
    spec = cubic_decay_spectrum()
    out = q_increment(np.array([1.0, 1.0]), spec, 2)
    assert out == pytest.approx([1.0, 0.3535533905932738], rel=1e-15)
    assert np.array_equal(q_increment(np.zeros(3), spec, 3), np.zeros(3))
    assert q_increment(np.array([2.0]), spec, 1) == pytest.approx([2.0])


def test_q_increment_rejects_vanishing_eigenvalue():
    dead = QSpectrum(eta_rule=lambda idx: (np.asarray(idx) < 2).astype(float), rho_Q=2.0)
    with pytest.raises(ValueError):
        q_increment(np.ones(2), dead, 2)


def test_trace_bounded_by_zeta3():
    spec = cubic_decay_spectrum()
    for k in (1, 5, 50, 500):
        assert spec.etas(k).sum() <= ZETA3


def test_q_increment_empirical_covariance():
    spec = cubic_decay_spectrum()
    h, n, k = 0.25, 100000, 3
    draws = derive_stream(21, 0, INCREMENTS).standard_normal((n, k)) * math.sqrt(h)
    q = q_increment(draws, spec, k)
    eta = spec.etas(k)
    cov = q.T @ q / n
    for j in range(k):
        sigma_var = eta[j] * h * math.sqrt(2.0 / n)  # std of a chi^2 variance estimate
        assert abs(cov[j, j] - eta[j] * h) < 4.0 * sigma_var
    off = cov[~np.eye(k, dtype=bool)]
    assert np.max(np.abs(off)) < 4.0 * h * math.sqrt(1.0 / n)


def test_dump_load_roundtrip():
    fp = sample_fine_path(5, 1, 32, 4, 1.5)
    buf = io.BytesIO()
    dump_fine_path(fp, buf)
    buf.seek(0)
    back = load_fine_path(buf)
    assert back.M_fine == 32 and back.K_max == 4
    assert back.T == 1.5 and back.seed == 5
    assert np.array_equal(back.increments, fp.increments)


def test_stream_derivation_separates_coordinates():
    base = derive_stream(1, 0, SERIES, 0).standard_normal(6)
    for other in (derive_stream(1, 1, SERIES, 0), derive_stream(1, 0, TAIL, 0),
                  derive_stream(1, 0, SERIES, 1), derive_stream(2, 0, SERIES, 0)):
        assert not np.array_equal(base, other.standard_normal(6))
    again = derive_stream(1, 0, SERIES, 0).standard_normal(6)
    assert np.array_equal(base, again)


def test_stream_prefix_stability():
    short = derive_stream(3, 2, SERIES, 7).standard_normal(8)
    long = derive_stream(3, 2, SERIES, 7).standard_normal(32)
    assert np.array_equal(short, long[:8])
