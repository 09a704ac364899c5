import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from templag.errors import DomainError
from templag.specfun import (
    exp_sinh,
    gamma_ratio,
    gauss_jacobi,
    gauss_laguerre,
    gauss_legendre,
    laguerre,
    laguerre_derivative,
    laguerre_table,
    log_gamma,
    pochhammer,
)

# ln sqrt(pi), mpmath at 30 digits
LOG_GAMMA_HALF = 0.57236494292470008707
# Gamma(6.7) / Gamma(6), mpmath at 30 digits
GAMMA_RATIO_07 = 3.4450626397105902469
# int_0^1 (1-t)^0.3 t^3 dt, scipy adaptive quadrature
JACOBI_T3 = 0.14141571269983808


def test_log_gamma_examples():
    assert log_gamma(1.0) == 0.0
    assert log_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-14)
    assert log_gamma(0.5) == pytest.approx(LOG_GAMMA_HALF, rel=1e-14)


@pytest.mark.parametrize("x", [1e-8, 0.3, 2.5, 17.0, 123.456, 9999.5])
def test_log_gamma_accuracy(x):
    ref = float(mp.loggamma(mp.mpf(x)))
    assert abs(log_gamma(x) - ref) <= 1e-13 * max(abs(ref), 1.0)


@pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
def test_log_gamma_rejects_nonpositive(x):
    with pytest.raises(DomainError):
        log_gamma(x)


def test_pochhammer():
    assert pochhammer(3.7, 0) == 1.0
    assert pochhammer(2, 3) == 24.0
    assert pochhammer(0.5, 2) == 0.75
    assert pochhammer(1.3, 6) == pytest.approx(math.gamma(7.3) / math.gamma(1.3), rel=1e-13)


def test_gamma_ratio_examples():
    for nu in (0.0, 0.4, 2.0):
        for n in (0, 3, 50):
            assert gamma_ratio(nu, 0.0, n) == 1.0
    assert gamma_ratio(1, 1, 2) == pytest.approx(3.0, rel=1e-14)
    assert gamma_ratio(0.7, 0.7, 5) == pytest.approx(GAMMA_RATIO_07, rel=1e-13)


def test_gamma_ratio_large_n_finite():
    assert np.isfinite(gamma_ratio(1.5, 1.5, 400))


def test_gamma_ratio_pole():
    with pytest.raises(DomainError):
        gamma_ratio(-1.0, 0.5, 0)
    with pytest.raises(DomainError):
        gamma_ratio(0.0, 1.0, 0)


def test_gamma_ratio_telescoping():
    n = np.arange(40)
    for nu, m1, m2 in [(0.5, 0.3, 0.9), (1.0, 1.2, 0.4), (2.0, 0.01, 1.7)]:
        lhs = gamma_ratio(nu, -m2, n) * gamma_ratio(nu + m2, -m1, n)
        rhs = gamma_ratio(nu, -(m1 + m2), n)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_laguerre_examples():
    x = np.linspace(0, 20, 7)
    np.testing.assert_array_equal(laguerre(0.4, 0, x), np.ones_like(x))
    np.testing.assert_allclose(laguerre(0.4, 1, x), 1.4 - x, rtol=1e-15)
    for a in (-0.5, 0.0, 2.3):
        for n in (1, 5, 12):
            assert laguerre(a, n, 0.0) == pytest.approx(pochhammer(a + 1, n) / math.factorial(n), rel=1e-13)


@pytest.mark.parametrize("a,n,x", [(0.0, 7, 3.2), (-0.6, 20, 11.0), (2.5, 33, 40.0), (1.0, 64, 0.01)])
def test_laguerre_vs_hypergeometric(a, n, x):
    ref = float(mp.laguerre(n, a, x))
    assert laguerre(a, n, x) == pytest.approx(ref, rel=1e-11, abs=1e-11)


def test_laguerre_rejects_alpha():
    with pytest.raises(DomainError):
        laguerre(-1.0, 2, 0.5)


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(min_value=-0.99, max_value=3.0),
    n=st.integers(min_value=0, max_value=64),
    x=st.floats(min_value=0.0, max_value=50.0),
)
def test_laguerre_recurrence_consistency(a, n, x):
    lhs = laguerre(a, n, x) - laguerre_derivative(a, n, x) + laguerre_derivative(a, n + 1, x)
    scale = max(abs(laguerre(a, n, x)), abs(laguerre_derivative(a, n + 1, x)), 1.0)
    assert abs(lhs) <= 1e-10 * scale


def test_laguerre_derivative_as_sum():
    x = np.linspace(0, 15, 9)
    a = 0.7
    table = laguerre_table(a, 9, x)
    np.testing.assert_allclose(laguerre_derivative(a, 10, x), -table.sum(axis=0), rtol=1e-11, atol=1e-11)


@pytest.mark.parametrize("k,n", [(1, 3), (2, 5), (3, 9)])
def test_negative_integer_parameter_identity(k, n):
    # oracle-only: L_n^{(-k)}(x) = (-1)^k (n-k)!/n! x^k L_{n-k}^{(k)}(x)
    x = np.linspace(0.1, 12, 6)
    lhs = laguerre_table(-float(k), n, x)[n]
    rhs = (-1) ** k * math.factorial(n - k) / math.factorial(n) * x**k * laguerre(k, n - k, x)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-12)


def test_gauss_laguerre_examples():
    r = gauss_laguerre(0.0, 1)
    assert r.nodes[0] == pytest.approx(1.0, rel=1e-15)
    assert r.weights[0] == pytest.approx(1.0, rel=1e-15)
    assert gauss_laguerre(0.0, 2).integrate(gauss_laguerre(0.0, 2).nodes ** 2) == pytest.approx(2.0, rel=1e-14)
    assert r.kind == "gauss-laguerre-generalized"


@pytest.mark.parametrize("a", [-0.7, -0.2, 0.0, 0.5, 1.3, 3.0])
@pytest.mark.parametrize("N", [1, 5, 40, 120])
def test_gauss_laguerre_structure(a, N):
    r = gauss_laguerre(a, N)
    assert r.size == N
    assert np.all(r.weights >= 0)
    if N <= 100:  # beyond that the last weights underflow to zero
        assert np.all(r.weights > 0)
    assert np.all(np.diff(r.nodes) > 0)
    assert r.weights.sum() == pytest.approx(math.gamma(a + 1), rel=1e-13)
    np.testing.assert_allclose(laguerre(a, N, r.nodes) / np.maximum(1.0, np.abs(laguerre_derivative(a, N, r.nodes))), 0, atol=1e-10)


@pytest.mark.parametrize("a", [-0.5, 0.0, 1.5])
def test_gauss_laguerre_polynomial_exactness(a):
    N = 6
    r = gauss_laguerre(a, N)
    for d in range(2 * N):
        ref = math.gamma(a + d + 1)
        assert r.integrate(r.nodes**d) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("a", [-0.6, 0.0, 1.0, 2.5])
def test_gauss_laguerre_orthogonality(a):
    N = 30
    r = gauss_laguerre(a, N)
    L = laguerre_table(a, N - 1, r.nodes)
    G = (L * r.weights) @ L.T
    gam = np.exp([math.lgamma(n + a + 1) - math.lgamma(n + 1) for n in range(N)])
    np.testing.assert_allclose(G / np.sqrt(np.outer(gam, gam)), np.eye(N), atol=1e-11)


def test_gauss_jacobi_examples():
    assert gauss_jacobi(0.0, 0.0, 7).weights.sum() == pytest.approx(1.0, rel=1e-14)
    assert gauss_jacobi(-0.5, 0.0, 7).weights.sum() == pytest.approx(2.0, rel=1e-13)
    r = gauss_jacobi(0.3, 0.0, 4)
    assert r.integrate(r.nodes**3) == pytest.approx(JACOBI_T3, rel=1e-12)


@pytest.mark.parametrize("a,b", [(-0.5, 0.0), (0.3, -0.4), (1.2, 2.0), (-0.9, -0.9)])
def test_gauss_jacobi_exactness(a, b):
    N = 5
    r = gauss_jacobi(a, b, N)
    assert np.all(r.weights > 0) and np.all(np.diff(r.nodes) > 0)
    assert np.all((r.nodes > 0) & (r.nodes < 1))
    for d in range(2 * N):
        ref = float(mp.beta(b + d + 1, a + 1))
        assert r.integrate(r.nodes**d) == pytest.approx(ref, rel=1e-12)


def test_gauss_legendre_is_unit_jacobi():
    r = gauss_legendre(9)
    assert r.integrate(np.cos(r.nodes)) == pytest.approx(math.sin(1.0), rel=1e-14)


def test_rule_arrays_read_only():
    r = gauss_laguerre(0.5, 4)
    with pytest.raises(ValueError):
        r.nodes[0] = 0.0


@pytest.mark.parametrize("b", [-0.5, 0.0, 0.3, 2.0])
def test_exp_sinh_endpoint_power(b):
    rate = 1.7
    r = exp_sinh(rate)
    val = r.integrate(r.nodes**b * np.exp(-rate * r.nodes))
    assert val == pytest.approx(math.gamma(b + 1) / rate ** (b + 1), rel=1e-12)


def test_rule_errors():
    with pytest.raises(DomainError):
        gauss_laguerre(-1.0, 3)
    with pytest.raises(DomainError):
        gauss_jacobi(0.0, -1.2, 3)
    with pytest.raises(DomainError):
        gauss_laguerre(0.0, 0)
    with pytest.raises(DomainError):
        exp_sinh(0.0)
