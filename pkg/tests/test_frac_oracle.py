import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import eval_genlaguerre

from templag import frac_oracle as fo
from templag.errors import DomainError, NumericError, PreconditionError

X = np.array([0.2, 0.7, 1.5, 3.0, 6.0])


def ref_laguerre(n, a, x):
    # scipy's hypergeometric route, independent of the package recurrence
    return eval_genlaguerre(n, a, np.asarray(x, dtype=float))


def lag_fn(n, a, prefactor):
    """x^a L_n^{(a)}(x) or e^{-x} L_n^{(a)}(x)."""
    if prefactor == "power":
        return lambda y: np.asarray(y, dtype=float) ** a * ref_laguerre(n, a, y)
    return lambda y: np.exp(-np.asarray(y, dtype=float)) * ref_laguerre(n, a, y)


# ---------------------------------------------------------------- examples


@pytest.mark.parametrize("mu", [0.3, 1.0, 1.7])
def test_integral_of_constant(mu):
    got = fo.rl_left_integral(lambda y: np.ones_like(y), 0.0, mu, X)
    np.testing.assert_allclose(got, X**mu / math.gamma(mu + 1), rtol=1e-10)


@pytest.mark.parametrize("b,mu", [(0.5, 0.4), (-0.3, 1.2), (2.0, 0.75)])
def test_integral_of_power(b, mu):
    f = fo.Callable1D(lambda y: y**b, power=b)
    got = fo.rl_left_integral(f, 0.0, mu, X)
    expected = math.gamma(b + 1) / math.gamma(b + mu + 1) * X ** (b + mu)
    np.testing.assert_allclose(got, expected, rtol=1e-10)


def test_shifted_lower_limit():
    got = fo.rl_left_integral(lambda y: np.ones_like(y), 1.0, 0.5, 1.0 + X)
    np.testing.assert_allclose(got, X**0.5 / math.gamma(1.5), rtol=1e-10)


def test_small_order_limit():
    f = fo.Callable1D(lambda y: np.exp(-y) * (1 + y), decay=1.0)
    got = fo.rl_left_integral(f, 0.0, 1e-3, X)
    np.testing.assert_allclose(got, f(X), rtol=0, atol=5e-3 * np.abs(f(X)).max())


def test_tempered_integral_scaling():
    # exp(-lam x) I^mu[exp(lam y) f] for f = exp(-lam y) gives x^mu / Gamma(mu + 1) times exp(-lam x)
    lam, mu = 0.9, 0.6
    f = fo.Callable1D(lambda y: np.exp(-lam * y), decay=lam)
    got = fo.tempered_left_integral(f, mu, lam, fo.BASE_ZERO, X)
    np.testing.assert_allclose(got, np.exp(-lam * X) * X**mu / math.gamma(mu + 1), rtol=1e-10)


@pytest.mark.parametrize("mu", [0.25, 0.5, 0.8])
def test_tempered_derivative_of_decaying_exponential(mu):
    lam = 0.7
    f = fo.Callable1D(lambda y: np.exp(-lam * y), decay=lam)
    got = fo.tempered_left_derivative(f, mu, lam, fo.BASE_ZERO, X)
    np.testing.assert_allclose(got, np.exp(-lam * X) * X ** (-mu) / math.gamma(1 - mu), rtol=1e-7)


@pytest.mark.parametrize("s", [0.3, 0.5, 1.4])
def test_right_derivative_of_exponential(s):
    lam = 0.6
    f = fo.Callable1D(lambda y: np.exp(-y), decay=1.0)
    got = fo.tempered_right_derivative(f, s, lam, X)
    np.testing.assert_allclose(got, (1 + lam) ** s * np.exp(-X), rtol=1e-7)


def test_whole_line_left_derivative_of_exponential():
    # for base -inf, exp(a y) is an eigenfunction with eigenvalue (a + lam)^s
    lam, s, a = 0.5, 0.6, 1.0
    f = fo.Callable1D(lambda y: np.exp(np.minimum(a * y, 0.0)) * (y <= 0) + 0.0, decay=a, breaks=(0.0,))
    y = -np.array([0.5, 1.0, 2.5])
    # only the y <= 0 part matters to the left of zero
    got = fo.tempered_left_derivative(f, s, lam, fo.BASE_NEG_INF, y)
    np.testing.assert_allclose(got, (a + lam) ** s * np.exp(a * y), rtol=1e-7)


# ---------------------------------------------------------------- Laguerre identities (untempered)


CASES = [
    (mu, a, n)
    for mu in (0.3, 0.7, 1.4)
    for a in (0.0, 0.5, 2.0)
    for n in (0, 3, 8)
]


@pytest.mark.parametrize("mu,a,n", CASES)
def test_left_integral_of_laguerre_polynomial(mu, a, n):
    f = fo.Callable1D(lag_fn(n, a, "power"), power=a)
    got = fo.tempered_left_integral(f, mu, 0.0, fo.BASE_ZERO, X)
    ratio = math.gamma(n + a + 1) / math.gamma(n + a + mu + 1)
    expected = ratio * X ** (a + mu) * ref_laguerre(n, a + mu, X)
    np.testing.assert_allclose(got, expected, rtol=1e-8, atol=1e-9 * np.abs(expected).max())


@pytest.mark.parametrize("mu,a,n", [c for c in CASES if c[1] >= c[0]])
def test_left_derivative_of_laguerre_polynomial(mu, a, n):
    f = fo.Callable1D(lag_fn(n, a, "power"), power=a)
    got = fo.tempered_left_derivative(f, mu, 0.0, fo.BASE_ZERO, X)
    ratio = math.gamma(n + a + 1) / math.gamma(n + a - mu + 1)
    expected = ratio * X ** (a - mu) * ref_laguerre(n, a - mu, X)
    np.testing.assert_allclose(got, expected, rtol=1e-6, atol=1e-7 * np.abs(expected).max())


@pytest.mark.parametrize("mu,a,n", [c for c in CASES if c[1] >= c[0]])
def test_right_integral_of_laguerre_function(mu, a, n):
    f = fo.Callable1D(lag_fn(n, a, "exp"), decay=1.0)
    got = fo.tempered_right_integral(f, mu, 0.0, X)
    expected = np.exp(-X) * ref_laguerre(n, a - mu, X)
    np.testing.assert_allclose(got, expected, rtol=1e-8, atol=1e-9 * np.abs(expected).max())


@pytest.mark.parametrize("mu,a,n", CASES)
def test_right_derivative_of_laguerre_function(mu, a, n):
    f = fo.Callable1D(lag_fn(n, a, "exp"), decay=1.0)
    got = fo.tempered_right_derivative(f, mu, 0.0, X)
    expected = np.exp(-X) * ref_laguerre(n, a + mu, X)
    np.testing.assert_allclose(got, expected, rtol=1e-6, atol=1e-7 * np.abs(expected).max())


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("n", [0, 2, 5])
def test_integer_derivative_of_laguerre_function(k, n):
    # D^k [x^a L_n^{(a)}] = Gamma(n+a+1)/Gamma(n+a-k+1) x^{a-k} L_n^{(a-k)}
    a = 2.0
    f = fo.Callable1D(lag_fn(n, a, "power"), power=a)
    for _ in range(k - 1):
        f = fo.Callable1D(lambda y, g=f: fo.tempered_left_derivative(g, 1.0, 0.0, fo.BASE_ZERO, y), power=a - 1)
    got = fo.tempered_left_derivative(f, 1.0, 0.0, fo.BASE_ZERO, X)
    ratio = math.gamma(n + a + 1) / math.gamma(n + a - k + 1)
    expected = ratio * X ** (a - k) * ref_laguerre(n, a - k, X)
    np.testing.assert_allclose(got, expected, rtol=1e-6, atol=1e-7 * np.abs(expected).max())


# ---------------------------------------------------------------- properties


def test_semigroup():
    lam = 0.8
    f = fo.Callable1D(lambda y: np.exp(-y) * np.sin(y + 0.3), decay=1.0)
    x = np.array([0.5, 1.5, 3.0])
    inner = fo.Callable1D(lambda y: fo.tempered_left_integral(f, 0.4, lam, fo.BASE_ZERO, y), decay=lam, power=0.4)
    two = fo.tempered_left_integral(inner, 0.5, lam, fo.BASE_ZERO, x)
    one = fo.tempered_left_integral(f, 0.9, lam, fo.BASE_ZERO, x)
    np.testing.assert_allclose(two, one, rtol=1e-8)


def test_inversion():
    lam, mu = 0.5, 0.6
    f = fo.Callable1D(lambda y: y * np.exp(-y), decay=1.0, power=1.0)
    g = fo.Callable1D(lambda y: fo.tempered_left_integral(f, mu, lam, fo.BASE_ZERO, y), decay=lam, power=1.0 + mu)
    got = fo.tempered_left_derivative(g, mu, lam, fo.BASE_ZERO, X)
    np.testing.assert_allclose(got, f(X), rtol=1e-6, atol=1e-8)


def test_duality():
    # int (I_left f) g = int f (I_right g) on the half line
    lam, mu = 0.7, 0.45
    f = fo.Callable1D(lambda y: y * np.exp(-y), decay=1.0, power=1.0)
    g = fo.Callable1D(lambda y: np.exp(-1.5 * y) * (1 + y), decay=1.5)
    lhs, _ = integrate.quad(lambda y: fo.tempered_left_integral(f, mu, lam, fo.BASE_ZERO, y) * g(y), 0, 40, limit=200)
    rhs, _ = integrate.quad(lambda y: f(y) * fo.tempered_right_integral(g, mu, lam, y), 0, 40, limit=200)
    assert lhs == pytest.approx(rhs, rel=1e-8)


# ---------------------------------------------------------------- errors and configuration


def test_quad_cap_environment(monkeypatch):
    monkeypatch.delenv("TEMPLAG_QUAD_CAP", raising=False)
    assert fo.quad_cap() == 1600
    monkeypatch.setenv("TEMPLAG_QUAD_CAP", "400")
    assert fo.quad_cap() == 400
    for bad in ("many", "10"):
        monkeypatch.setenv("TEMPLAG_QUAD_CAP", bad)
        with pytest.raises(PreconditionError):
            fo.quad_cap()


def test_cap_exceeded_raises(monkeypatch):
    monkeypatch.setenv("TEMPLAG_QUAD_CAP", "200")
    f = fo.Callable1D(lambda y: np.sin(40 * y), decay=None)
    with pytest.raises(NumericError):
        fo.rl_left_integral(f, 0.0, 0.5, np.array([3.0]))


def test_missing_decay_hint():
    f = lambda y: np.exp(-y)
    with pytest.raises(PreconditionError):
        fo.tempered_right_integral(f, 0.5, 1.0, X)
    with pytest.raises(PreconditionError):
        fo.tempered_right_derivative(f, 0.5, 1.0, X)
    with pytest.raises(PreconditionError):
        fo.tempered_left_integral(f, 0.5, 1.0, fo.BASE_NEG_INF, -X)


def test_domain_errors():
    f = fo.Callable1D(lambda y: np.exp(-y), decay=1.0)
    with pytest.raises(DomainError):
        fo.tempered_left_integral(f, 0.5, 1.0, fo.BASE_ZERO, np.array([0.0, 1.0]))
    with pytest.raises(DomainError):
        fo.tempered_left_derivative(f, 2.0, 1.0, fo.BASE_ZERO, X)
    with pytest.raises(DomainError):
        fo.tempered_left_integral(f, 0.0, 1.0, fo.BASE_ZERO, X)
    with pytest.raises(PreconditionError):
        fo.tempered_left_integral(f, 0.5, 1.0, 3.0, X)
