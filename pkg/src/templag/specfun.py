"""Special functions and Gauss quadrature rules.

Laguerre polynomials are evaluated by the upward three-term recurrence.
Gauss rules come from the symmetric Jacobi matrix of the weight (eigenvalues
only), followed by Newton polishing of the nodes on the orthonormal
recurrence and Christoffel weights computed with running rescaling so that
the far Laguerre nodes do not overflow.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import betaln, gammaln

from .errors import DomainError, NumericError

__all__ = [
    "QuadratureRule",
    "log_gamma",
    "pochhammer",
    "gamma_ratio",
    "laguerre",
    "laguerre_table",
    "laguerre_derivative",
    "gauss_laguerre",
    "gauss_jacobi",
    "gauss_legendre",
    "exp_sinh",
]


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights of an interpolatory rule.

    ``kind`` is ``"gauss-laguerre-generalized"`` (weight x^alpha e^{-x} on
    [0, inf)), ``"gauss-jacobi"`` (weight (1-t)^a t^b on [0, 1]) or
    ``"exp-sinh"`` (unit weight on [0, inf), double exponential).
    """

    kind: str
    parameters: tuple
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self):
        return len(self.nodes)

    def integrate(self, values):
        """Apply the rule to samples taken at ``nodes`` (last axis)."""
        return np.asarray(values) @ self.weights


def _check_positive(x, name="x"):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError(f"{name} must be positive, got {x!r}")
    return x


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    x = _check_positive(x)
    out = gammaln(x)
    return float(out) if out.ndim == 0 else out


def pochhammer(a, j):
    """Rising factorial (a)_j = a (a+1) ... (a+j-1), with (a)_0 = 1."""
    j = int(j)
    if j < 0:
        raise DomainError(f"pochhammer needs j >= 0, got {j}")
    out = 1.0
    for i in range(j):
        out *= a + i
    return out


def gamma_ratio(a, b, n):
    """h_n^{a,b} = Gamma(n+1+a) / Gamma(n+1+a-b), through log-Gamma differences.

    ``n`` may be an integer array.
    """
    n = np.asarray(n, dtype=float)
    top = n + 1.0 + a
    bottom = top - b
    if np.any(top <= 0) or np.any(bottom <= 0):
        raise DomainError(
            f"gamma_ratio arguments reach a pole: a={a}, b={b}, n={n!r}"
        )
    if b == 0:
        out = np.ones_like(top)
    else:
        out = np.exp(gammaln(top) - gammaln(bottom))
    return float(out) if out.ndim == 0 else out


def laguerre_table(alpha, n, x):
    """Values L_0^{(alpha)}(x), ..., L_n^{(alpha)}(x) stacked along axis 0.

    The recurrence is valid for any real alpha; callers validate alpha.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n + 1,) + x.shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = alpha + 1.0 - x
    for k in range(1, n):
        out[k + 1] = ((2 * k + 1 + alpha - x) * out[k] - (k + alpha) * out[k - 1]) / (k + 1)
    return out


def laguerre(alpha, n, x):
    """L_n^{(alpha)}(x) for alpha > -1."""
    if not alpha > -1:
        raise DomainError(f"Laguerre parameter must exceed -1, got {alpha}")
    n = int(n)
    if n < 0:
        raise DomainError(f"Laguerre degree must be >= 0, got {n}")
    x = np.asarray(x, dtype=float)
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    for k in range(n):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return float(cur) if cur.ndim == 0 else cur


def laguerre_derivative(alpha, n, x):
    """d/dx L_n^{(alpha)}(x) = -L_{n-1}^{(alpha+1)}(x)."""
    if n == 0:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        return float(out) if out.ndim == 0 else out
    return -laguerre(alpha + 1.0, n - 1, x)


def _orthonormal_sweep(x, diag, off, mu0):
    """Run the orthonormal recurrence up to degree len(diag).

    Returns (p_N, p_N', log of sum_{k<N} p_k^2) with p scaled consistently,
    where ``off[k]`` couples degrees k and k+1.
    """
    N = len(diag)
    p_prev = np.zeros_like(x)
    p = np.full_like(x, 1.0 / math.sqrt(mu0))
    dp_prev = np.zeros_like(x)
    dp = np.zeros_like(x)
    ssq = np.zeros_like(x)
    logscale = np.zeros_like(x)
    for k in range(N):
        ssq += p * p
        b_prev = off[k - 1] if k > 0 else 0.0
        p_next = ((x - diag[k]) * p - b_prev * p_prev) / off[k]
        dp_next = (p + (x - diag[k]) * dp - b_prev * dp_prev) / off[k]
        p_prev, p, dp_prev, dp = p, p_next, dp, dp_next
        big = np.abs(p) > 1e100
        if np.any(big):
            c = np.where(big, np.abs(p), 1.0)
            p /= c
            p_prev /= c
            dp /= c
            dp_prev /= c
            ssq /= c * c
            logscale += np.log(c)
    return p, dp, np.log(ssq) + 2.0 * logscale


def _gauss_from_recurrence(diag, off, mu0, kind, parameters, lower=-np.inf):
    N = len(diag)
    if N == 1:
        nodes = np.array([diag[0]])
    else:
        try:
            nodes = eigh_tridiagonal(diag, off[: N - 1], eigvals_only=True)
        except np.linalg.LinAlgError as exc:
            raise NumericError("tridiagonal eigensolve failed", kind=kind, N=N) from exc
        nodes = np.sort(nodes)
    for _ in range(12):
        p, dp, _ = _orthonormal_sweep(nodes, diag, off, mu0)
        step = p / dp
        nodes = nodes - step
        if np.all(np.abs(step) <= 1e-14 * np.maximum(np.abs(nodes), 1e-300)):
            break
    _, _, logssq = _orthonormal_sweep(nodes, diag, off, mu0)
    weights = np.exp(-logssq)
    if (
        not np.all(np.isfinite(nodes))
        or np.any(np.diff(nodes) <= 0)
        or np.any(nodes <= lower)
        or np.any(~(weights >= 0))
    ):
        raise NumericError("Gauss rule construction failed", kind=kind, N=N, parameters=parameters)
    return QuadratureRule(kind, parameters, nodes, weights)


@lru_cache(maxsize=256)
def _gauss_laguerre(alpha, N):
    k = np.arange(N, dtype=float)
    diag = 2.0 * k + alpha + 1.0
    kk = np.arange(1, N + 1, dtype=float)
    off = np.sqrt(kk * (kk + alpha))
    return _gauss_from_recurrence(
        diag, off, math.exp(gammaln(alpha + 1.0)), "gauss-laguerre-generalized", (alpha,), lower=0.0
    )


def gauss_laguerre(alpha, N):
    """N-point rule for the weight x^alpha e^{-x} on [0, inf)."""
    if not alpha > -1:
        raise DomainError(f"Laguerre weight exponent must exceed -1, got {alpha}")
    if int(N) < 1:
        raise DomainError(f"rule size must be >= 1, got {N}")
    return _gauss_laguerre(float(alpha), int(N))


def _jacobi_recurrence(a, b, N):
    # weight (1-x)^a (1+x)^b on [-1, 1]
    diag = np.empty(N)
    off = np.empty(N)
    diag[0] = (b - a) / (a + b + 2.0)
    for k in range(1, N):
        s = 2.0 * k + a + b
        diag[k] = (b * b - a * a) / (s * (s + 2.0))
    for k in range(1, N + 1):
        s = 2.0 * k + a + b
        if k == 1:
            sq = 4.0 * (1 + a) * (1 + b) / ((2 + a + b) ** 2 * (3 + a + b))
        else:
            sq = 4.0 * k * (k + a) * (k + b) * (k + a + b) / (s * s * (s + 1.0) * (s - 1.0))
        off[k - 1] = math.sqrt(sq)
    return diag, off


@lru_cache(maxsize=256)
def _gauss_jacobi(a, b, N):
    diag, off = _jacobi_recurrence(a, b, N)
    mu0 = math.exp(betaln(a + 1.0, b + 1.0))
    return _gauss_from_recurrence(
        0.5 * (1.0 + diag), 0.5 * off, mu0, "gauss-jacobi", (a, b), lower=0.0
    )


def gauss_jacobi(a, b, N):
    """N-point rule on [0, 1] for the weight (1-t)^a t^b."""
    if not (a > -1 and b > -1):
        raise DomainError(f"Jacobi exponents must exceed -1, got a={a}, b={b}")
    if int(N) < 1:
        raise DomainError(f"rule size must be >= 1, got {N}")
    return _gauss_jacobi(float(a), float(b), int(N))


def gauss_legendre(N):
    """N-point Gauss-Legendre rule on [0, 1]."""
    return gauss_jacobi(0.0, 0.0, N)


@lru_cache(maxsize=64)
def _exp_sinh(rate, step):
    half_pi = 0.5 * math.pi
    # x from 1e-200 up to where rate*x reaches 800
    lo = math.asinh(math.log(1e-200 * rate) / half_pi)
    hi = math.asinh(math.log(800.0) / half_pi)
    tau = np.arange(math.floor(lo / step), math.ceil(hi / step) + 1) * step
    u = half_pi * np.sinh(tau)
    nodes = np.exp(u) / rate
    weights = step * half_pi * np.cosh(tau) * nodes
    return QuadratureRule("exp-sinh", (rate, step), nodes, weights)


def exp_sinh(rate, step=2.0**-5):
    """Double exponential rule for integrals over [0, inf).

    Suited to integrands that decay like exp(-rate x) and may carry an
    integrable algebraic singularity at the origin.
    """
    if not rate > 0:
        raise DomainError(f"decay rate must be positive, got {rate}")
    return _exp_sinh(float(rate), float(step))
