"""Weighted projections onto GLF spaces, weighted errors and rate fits."""

from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import DomainError, NumericError
from .glf_core import GLFExpansion, GLFParams, orthogonality_constant
from .specfun import gauss_laguerre, laguerre_table


@dataclass(frozen=True)
class WeightedNorm:
    """L2 norm with weight x^exponent on the half line."""

    exponent: float
    lam: float = None


def _scaled_samples(u, rule, lam):
    """u(y / 2 lam) * exp(y / 2) at the rule nodes (finite where weights vanish)."""
    y = rule.nodes
    keep = rule.weights > 0
    vals = np.zeros_like(y)
    x = y[keep] / (2.0 * lam)
    vals[keep] = np.asarray(u(x), dtype=float) * np.exp(0.5 * y[keep])
    if not np.all(np.isfinite(vals)):
        raise NumericError("non-finite samples in projection quadrature")
    return vals


def project_neg(u, nu, lam, N, size=None, power=None):
    """Orthogonal projection onto span{GLF_n^{(-nu, lam)}, n <= N} under x^{-nu}.

    ``power`` is the exponent b with u ~ x^b at the origin (default nu); it
    selects the Gauss-Laguerre weight so that u x^{-b} is sampled smoothly.
    """
    if not nu > 0:
        raise DomainError(f"project_neg needs nu > 0, got {nu}")
    b = nu if power is None else power
    rule = gauss_laguerre(b, size or N + 16)
    y = rule.nodes
    g = _scaled_samples(u, rule, lam) * rule.weights * y ** (-b)
    L = laguerre_table(nu, N, y)
    # (u, GLF_n)_{x^-nu} = int u e^{-lam x} L_n(2 lam x) dx
    inner = (L @ g) / (2.0 * lam)
    n = np.arange(N + 1)
    return GLFExpansion(GLFParams(-nu, lam), inner / orthogonality_constant(GLFParams(-nu, lam), n))


def project_pos(u, nu, lam, N, size=None, power=0.0):
    """Projection onto span{GLF_n^{(0, lam)}, n <= N} under the weight x^nu.

    The basis is orthogonal only for nu = 0, so a Gram system is solved.
    """
    if not nu > -1:
        raise DomainError(f"project_pos needs nu > -1, got {nu}")
    scale = (2.0 * lam) ** (-nu - 1.0)
    gram_rule = gauss_laguerre(nu, N + 2)
    Lg = laguerre_table(0.0, N, gram_rule.nodes)
    gram = (Lg * gram_rule.weights) @ Lg.T * scale
    b = nu + power
    rule = gauss_laguerre(b, size or N + 16)
    y = rule.nodes
    g = _scaled_samples(u, rule, lam) * rule.weights * y ** (-power)
    rhs = laguerre_table(0.0, N, y) @ g * scale
    try:
        coeffs = cho_solve(cho_factor(gram), rhs)
    except LinAlgError as exc:
        raise NumericError("Gram matrix is not positive definite", N=N, nu=nu) from exc
    return GLFExpansion(GLFParams(0.0, lam), coeffs)


def weighted_error(u, v, norm, size=None, power=None):
    """||u - v||_{x^a} for a callable u and an expansion v.

    The Gauss-Laguerre weight exponent is a + 2 b, where b is the power of
    u - v at the origin (default: the x-power of the expansion's family).
    """
    lam = v.params.lam if norm.lam is None else norm.lam
    b = v.params.singular_power if power is None else power
    beta = norm.exponent + 2.0 * b
    if not beta > -1:
        raise DomainError(f"weighted error integrand not integrable at 0 (exponent {beta})")
    rule = gauss_laguerre(beta, size or v.degree + 32)
    y = rule.nodes
    keep = rule.weights > 0
    x = y[keep] / (2.0 * lam)
    # sqrt(w e^y) formed in log space: e^{y/2} alone overflows at large nodes
    root = np.exp(0.5 * (np.log(rule.weights[keep]) + y[keep]))
    diff = (np.asarray(u(x), dtype=float) - np.asarray(v(x), dtype=float)) * root
    integrand = diff**2 * y[keep] ** (-beta) * x**norm.exponent
    total = np.sum(integrand) / (2.0 * lam)
    if not np.isfinite(total):
        raise NumericError("non-finite weighted error")
    return math.sqrt(max(total, 0.0))


def rate_fit(errors, discard=2):
    """Least-squares slope of log(error) against log(N).

    The ``discard`` smallest N are dropped when at least two points remain.
    """
    pts = sorted((int(n), float(e)) for n, e in errors)
    if len(pts) < 3:
        raise DomainError("rate_fit needs at least three points")
    if any(not e > 0 for _, e in pts):
        raise DomainError("rate_fit needs positive errors")
    if len(pts) - discard >= 2:
        pts = pts[discard:]
    logn = np.log([n for n, _ in pts])
    loge = np.log([e for _, e in pts])
    slope, _ = np.polyfit(logn, loge, 1)
    return float(slope)


def upsilon_constant(a, b, n):
    """Upper constant in Gamma(n+a)/Gamma(n+b) <= c * n^{a-b}."""
    if n < 1 or not (n + a > 1 and n + b > 1):
        raise DomainError(f"upsilon_constant needs n >= 1, n+a > 1, n+b > 1 (a={a}, b={b}, n={n})")
    d = a - b
    return math.exp(d / (2.0 * (n + b - 1.0)) + 1.0 / (12.0 * (n + a - 1.0)) + d * d / n)
