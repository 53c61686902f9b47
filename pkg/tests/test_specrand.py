"""Samplers and special functions: exact values, laws, reproducibility."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special as sp
from scipy import stats

from sicnet import (
    ParameterError,
    RngStream,
    log_gamma,
    regularized_gamma_q,
    sample_beta_1_m,
    sample_complex_gaussian_vector,
    sample_gamma_integer_shape,
    sample_poisson,
)


def test_log_gamma_trivial():
    assert log_gamma(1.0) == 0.0
    assert log_gamma(2.0) == 0.0


def test_log_gamma_against_high_precision_oracle():
    import mpmath as mp

    mp.mp.dps = 40
    oracle = float(mp.log(mp.gamma(mp.mpf("2.5"))))
    # Gamma(2.5) = (3/4) sqrt(pi); frozen from the oracle
    assert oracle == pytest.approx(0.28468287047291916, rel=1e-15)
    assert log_gamma(2.5) == pytest.approx(oracle, rel=1e-12)
    for x in (0.3, 1.7, 12.0, 345.6, 1e5):
        assert log_gamma(x) == pytest.approx(float(mp.log(mp.gamma(mp.mpf(x)))), rel=1e-12)
    out = log_gamma(np.array([1.0, 2.5]))
    assert out[0] == 0.0 and out[1] == pytest.approx(oracle, rel=1e-12)


def test_log_gamma_domain_error():
    with pytest.raises(ParameterError):
        log_gamma(0.0)
    with pytest.raises(ParameterError):
        log_gamma(-3.0)
    with pytest.raises(ParameterError):
        log_gamma(np.array([1.0, -1.0]))


def test_regularized_gamma_q_examples():
    assert regularized_gamma_q(1, 0.0) == 1.0
    assert regularized_gamma_q(2, 0.0) == 1.0
    # direct sum at k=2, x=1: e^-1 (1 + 1)
    assert regularized_gamma_q(2, 1.0) == pytest.approx(0.7357588823428846, rel=1e-12)


def test_regularized_gamma_q_matches_literal_sum():
    xs = np.concatenate([[0.0], np.logspace(-6, np.log10(50.0), 40)])
    for k in range(1, 17):
        j = np.arange(k)[:, None]
        with np.errstate(divide="ignore"):
            logterm = j * np.log(np.where(xs > 0, xs, 1.0)) - xs - sp.gammaln(j + 1)
        terms = np.exp(logterm)
        terms[1:, xs == 0.0] = 0.0
        literal = terms.sum(axis=0)
        got = regularized_gamma_q(k, xs)
        assert np.allclose(got, literal, rtol=1e-12, atol=1e-300)


@settings(max_examples=200, deadline=None)
@given(
    k=st.integers(min_value=1, max_value=16),
    x=st.floats(min_value=0.0, max_value=50.0),
    dx=st.floats(min_value=0.0, max_value=10.0),
)
def test_regularized_gamma_q_monotone(k, x, dx):
    # non-increasing in x, non-decreasing in k
    assert regularized_gamma_q(k, x + dx) <= regularized_gamma_q(k, x) + 1e-12
    assert regularized_gamma_q(k + 1, x) >= regularized_gamma_q(k, x) - 1e-12


def test_complex_gaussian_vector_moments():
    rng = RngStream(101)
    v = sample_complex_gaussian_vector(2, rng, size=500_000)
    power = np.abs(v) ** 2
    assert abs(power.mean() - 1.0) < 0.005
    re, im = v.real.ravel(), v.imag.ravel()
    assert abs(np.mean(re * im)) < 0.005
    ks = stats.kstest(re[:100_000], stats.norm(scale=np.sqrt(0.5)).cdf)
    assert ks.pvalue > 0.01


def test_complex_gaussian_vector_shape_and_validation():
    rng = RngStream(5)
    assert sample_complex_gaussian_vector(3, rng).shape == (3,)
    assert sample_complex_gaussian_vector(3, rng, size=7).shape == (7, 3)
    with pytest.raises(ParameterError):
        sample_complex_gaussian_vector(0, rng)


def test_gamma_integer_shape_moments_and_law():
    rng = RngStream(202)
    x = sample_gamma_integer_shape(2, rng, size=1_000_000)
    assert abs(x.mean() - 2.0) < 0.01
    assert abs(x.var() - 2.0) < 0.05
    # closed-form CDF oracle for shape 2: 1 - e^-x (1 + x)
    ks = stats.kstest(x[:100_000], lambda t: 1.0 - np.exp(-t) * (1.0 + t))
    assert ks.pvalue > 0.01


def test_gamma_large_shape_path():
    rng = RngStream(203)
    x = sample_gamma_integer_shape(40, rng, size=200_000)
    assert abs(x.mean() / 40.0 - 1.0) < 0.01


def test_beta_1_m_moments():
    rng = RngStream(303)
    u = sample_beta_1_m(1, rng, size=1_000_000)
    assert abs(u.mean() - 0.5) < 0.005
    b = sample_beta_1_m(2, rng, size=1_000_000)
    assert abs(b.mean() - 1.0 / 3.0) < 0.005
    # second moment 2 / (3 * 4)
    assert abs(np.mean(b**2) - 1.0 / 6.0) < 0.005


def test_poisson_moments_and_rare_zero():
    rng = RngStream(404)
    n = sample_poisson(200.0, rng, size=100_000)
    assert abs(n.mean() - 200.0) < 0.5
    assert abs(n.var() - 200.0) < 5.0
    z = sample_poisson(0.01, rng, size=100_000)
    assert abs(np.mean(z == 0) - np.exp(-0.01)) < 0.001


def test_stream_reproducibility_bit_identical():
    a = RngStream(99, 7)
    b = RngStream(99, 7)
    ua, ub = a.generator.random(1000), b.generator.random(1000)
    assert np.array_equal(ua, ub)
    na, nb = a.generator.standard_normal(1000), b.generator.standard_normal(1000)
    assert np.array_equal(na, nb)


def test_stream_independence_across_indices():
    streams = [RngStream(99, i).generator.random(100_000) for i in range(4)]
    for i in range(4):
        for j in range(i + 1, 4):
            assert not np.array_equal(streams[i], streams[j])
            assert abs(np.corrcoef(streams[i], streams[j])[0, 1]) < 0.01


def test_bad_arguments():
    rng = RngStream(1)
    with pytest.raises(ParameterError):
        regularized_gamma_q(0, 1.0)
    with pytest.raises(ParameterError):
        regularized_gamma_q(2, -1.0)
    with pytest.raises(ParameterError):
        sample_gamma_integer_shape(0, rng)
    with pytest.raises(ParameterError):
        sample_beta_1_m(0, rng)
    with pytest.raises(ParameterError):
        sample_poisson(0.0, rng)
    with pytest.raises(ParameterError):
        RngStream(1, -1)
