"""Generalized Laguerre functions and exact tempered operator maps.

A generalized Laguerre function (GLF) with parameter ``alpha`` and
tempering rate ``lam`` is

    alpha < 0:   x^{-alpha} e^{-lam x} L_n^{(-alpha)}(2 lam x)
    alpha >= 0:  e^{-lam x} L_n^{(alpha)}(2 lam x)

Tempered Riemann-Liouville integrals and derivatives act diagonally (up to
an index shift) on these families, so every operator used by the solvers
is a coefficient map between two labelled bases.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math
import threading

import numpy as np
from scipy.special import gammaln

from .errors import PreconditionError
from .specfun import gamma_ratio

LEFT, RIGHT = "left", "right"
INTEGRAL, DERIVATIVE = "integral", "derivative"

_INT_TOL = 1e-12


@dataclass(frozen=True)
class GLFParams:
    alpha: float
    lam: float

    def __post_init__(self):
        if not math.isfinite(self.alpha):
            raise PreconditionError(f"GLF parameter must be finite, got {self.alpha}")
        if not self.lam > 0:
            raise PreconditionError(f"tempering rate must be positive, got {self.lam}")

    @property
    def singular_power(self):
        """Exponent of the x-power prefactor (zero on the regular branch)."""
        return -self.alpha if self.alpha < 0 else 0.0

    @property
    def laguerre_parameter(self):
        return abs(self.alpha)


@dataclass(frozen=True, eq=False)
class GLFExpansion:
    """Finite expansion sum_n coeffs[n] * GLF_n^{(alpha, lam)}.

    ``dropped_modes`` counts leading input modes annihilated by the operator
    that produced this expansion.
    """

    params: GLFParams
    coeffs: np.ndarray
    dropped_modes: int = 0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.size == 0:
            raise PreconditionError("an expansion needs at least one coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, x):
        return expansion_eval(self, x)

    def norm_squared(self):
        """Weighted L2 norm squared from Parseval."""
        n = np.arange(len(self.coeffs))
        return float(np.sum(self.coeffs**2 * orthogonality_constant(self.params, n)))

    @classmethod
    def mode(cls, params, n, N=None):
        """Unit expansion e_n of length max(N, n) + 1."""
        size = (n if N is None else max(N, n)) + 1
        c = np.zeros(size)
        c[n] = 1.0
        return cls(params, c)


@dataclass(frozen=True)
class TemperedOperator:
    side: str
    kind: str
    order: float
    lam: float

    def __post_init__(self):
        if self.side not in (LEFT, RIGHT):
            raise PreconditionError(f"side must be 'left' or 'right', got {self.side!r}")
        if self.kind not in (INTEGRAL, DERIVATIVE):
            raise PreconditionError(f"kind must be 'integral' or 'derivative', got {self.kind!r}")
        if not self.order >= 0:
            raise PreconditionError(f"operator order must be >= 0, got {self.order}")
        if not self.lam > 0:
            raise PreconditionError(f"tempering rate must be positive, got {self.lam}")


def _prefactor(params, x):
    x = np.asarray(x, dtype=float)
    env = np.exp(-params.lam * x)
    if params.alpha < 0:
        env = env * x ** (-params.alpha)
    return env


def glf_table(params, N, x):
    """Values of GLF_0 .. GLF_N at the points ``x`` (shape (N+1,) + x.shape)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise PreconditionError("GLFs are evaluated on x >= 0; use reflect() for x < 0")
    a = params.laguerre_parameter
    y = 2.0 * params.lam * x
    out = np.empty((N + 1,) + x.shape)
    out[0] = 1.0
    if N >= 1:
        out[1] = a + 1.0 - y
    for k in range(1, N):
        out[k + 1] = ((2 * k + 1 + a - y) * out[k] - (k + a) * out[k - 1]) / (k + 1)
    return out * _prefactor(params, x)


def glf_eval(params, n, x):
    out = glf_table(params, int(n), x)[int(n)]
    return float(out) if out.ndim == 0 else out


def orthogonality_constant(params, n):
    """gamma_n^{|alpha|, lam} = Gamma(n+|a|+1) / ((2 lam)^{|a|+1} Gamma(n+1))."""
    a = params.laguerre_parameter
    n = np.asarray(n, dtype=float)
    out = np.exp(gammaln(n + a + 1.0) - gammaln(n + 1.0) - (a + 1.0) * math.log(2.0 * params.lam))
    return float(out) if out.ndim == 0 else out


def expansion_eval(u, x):
    """Clenshaw summation of a GLF expansion."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise PreconditionError("GLF expansions are evaluated on x >= 0")
    a = u.params.laguerre_parameter
    y = 2.0 * u.params.lam * x
    c = u.coeffs
    b1 = np.zeros_like(y)
    b2 = np.zeros_like(y)
    for k in range(len(c) - 1, -1, -1):
        # L_{k+1} = A_k L_k + B_k L_{k-1}
        A = (2 * k + 1 + a - y) / (k + 1)
        B_next = -(k + 1 + a) / (k + 2)
        b1, b2 = c[k] + A * b1 + B_next * b2, b1
    out = b1 * _prefactor(u.params, x)
    return float(out) if out.ndim == 0 else out


def _is_integer(v):
    return abs(v - round(v)) < _INT_TOL


class _MapCache:
    """Per-tuple memo for coefficient maps; writes are idempotent."""

    def __init__(self):
        self._store = {}
        self._lock = threading.Lock()

    def get(self, key, build):
        hit = self._store.get(key)
        if hit is None:
            value = build()
            value.setflags(write=False)
            with self._lock:
                hit = self._store.setdefault(key, value)
        return hit

    def clear(self):
        with self._lock:
            self._store.clear()

    def __len__(self):
        return len(self._store)


coefficient_cache = _MapCache()


def coefficient_map(side, kind, nu, mu, lam, N):
    """Multipliers for modes 0..N of the operator (side, kind, mu) on the family
    of parameter magnitude ``nu``; shifted-index branches are handled by the caller."""
    key = (side, kind, float(nu), float(mu), float(lam), int(N))
    n = np.arange(N + 1)

    def build():
        if mu == 0:
            return np.ones(N + 1)
        if side == LEFT and kind == INTEGRAL:
            return np.atleast_1d(gamma_ratio(nu, -mu, n))
        if side == LEFT and kind == DERIVATIVE:
            return np.atleast_1d(gamma_ratio(nu, mu, n))
        if kind == INTEGRAL:
            return np.full(N + 1, (2.0 * lam) ** (-mu))
        return np.full(N + 1, (2.0 * lam) ** mu)

    return coefficient_cache.get(key, build)


def apply_tempered(op, u):
    """Exact image of a GLF expansion under a tempered fractional operator.

    Left operators act on families with alpha = -nu <= 0 and right operators
    on alpha = nu >= 0.  The left derivative of order nu + k (k >= 1 integer)
    on alpha = -nu drops the k lowest modes.
    """
    if not math.isclose(op.lam, u.params.lam, rel_tol=1e-14):
        raise PreconditionError(
            f"operator rate {op.lam} differs from expansion rate {u.params.lam}"
        )
    alpha, mu, lam = u.params.alpha, op.order, op.lam
    N = u.degree
    if mu == 0:
        return GLFExpansion(u.params, u.coeffs)

    if op.side == LEFT:
        if alpha > 0:
            raise PreconditionError(
                f"left operators need a family with alpha = -nu <= 0, got alpha={alpha}"
            )
        nu = -alpha
        if op.kind == INTEGRAL:
            m = coefficient_map(LEFT, INTEGRAL, nu, mu, lam, N)
            return GLFExpansion(GLFParams(-nu - mu, lam), m * u.coeffs)
        if nu >= mu:
            m = coefficient_map(LEFT, DERIVATIVE, nu, mu, lam, N)
            return GLFExpansion(GLFParams(mu - nu, lam), m * u.coeffs)
        k = mu - nu
        if _is_integer(k):
            k = int(round(k))
            if N < k:
                raise PreconditionError(
                    f"order nu+{k} left derivative annihilates every mode of a degree-{N} expansion"
                )
            m = coefficient_map(LEFT, DERIVATIVE, nu, nu, lam, N)
            c = (-2.0 * lam) ** k * m[k:] * u.coeffs[k:]
            return GLFExpansion(GLFParams(float(k), lam), c, dropped_modes=k)
        raise PreconditionError(
            f"left derivative of order {mu} needs nu >= mu or mu - nu integer, got nu={nu}"
        )

    if alpha < 0:
        raise PreconditionError(
            f"right operators need a family with alpha = nu >= 0, got alpha={alpha}"
        )
    nu = alpha
    if op.kind == INTEGRAL:
        if nu < mu:
            raise PreconditionError(
                f"right integral of order {mu} needs nu >= mu, got nu={nu}"
            )
        m = coefficient_map(RIGHT, INTEGRAL, nu, mu, lam, N)
        return GLFExpansion(GLFParams(nu - mu, lam), m * u.coeffs)
    m = coefficient_map(RIGHT, DERIVATIVE, nu, mu, lam, N)
    return GLFExpansion(GLFParams(nu + mu, lam), m * u.coeffs)


def apply_integer_derivative(side, k, u):
    """Integer-order tempered derivative of an expansion with alpha = -nu, k <= nu.

    The right derivative raises every mode index by k.
    """
    k = int(k)
    nu = -u.params.alpha
    if k < 1:
        raise PreconditionError(f"integer derivative order must be >= 1, got {k}")
    if u.params.alpha > 0 or k > nu + _INT_TOL:
        raise PreconditionError(f"integer derivative needs alpha = -nu with k <= nu, got k={k}, alpha={u.params.alpha}")
    lam = u.params.lam
    params = GLFParams(k - nu, lam)
    n = np.arange(u.degree + 1)
    if side == LEFT:
        m = np.exp(gammaln(n + nu + 1.0) - gammaln(n + nu - k + 1.0))
        return GLFExpansion(params, m * u.coeffs)
    if side == RIGHT:
        m = (-1.0) ** k * np.exp(gammaln(n + k + 1.0) - gammaln(n + 1.0))
        return GLFExpansion(params, np.concatenate([np.zeros(k), m * u.coeffs]))
    raise PreconditionError(f"side must be 'left' or 'right', got {side!r}")


def sl_eigenvalue(side, s, nu, lam, n):
    """Eigenvalue of the fractional Sturm-Liouville chain on mode n.

    ``side="left-first"`` is the chain applying the left derivative first to
    the alpha = -nu family; ``"right-first"`` applies the right derivative
    first to the alpha = nu family.
    """
    if side == "left-first":
        if nu < s:
            raise PreconditionError(f"left-first chain needs nu >= s, got nu={nu}, s={s}")
        return (2.0 * lam) ** s * gamma_ratio(nu, s, n)
    if side == "right-first":
        return (2.0 * lam) ** s * gamma_ratio(nu + s, s, n)
    raise PreconditionError(f"side must be 'left-first' or 'right-first', got {side!r}")


def absorb_power(u):
    """Multiply by x^{alpha}; on GLFs this only flips the label alpha -> -alpha."""
    return GLFExpansion(GLFParams(-u.params.alpha, u.params.lam), u.coeffs)


def sl_chain(side, s, u):
    """Apply the Sturm-Liouville operator chain to an expansion in coefficient space."""
    lam = u.params.lam
    if side == "left-first":
        w = apply_tempered(TemperedOperator(LEFT, DERIVATIVE, s, lam), u)
        w = absorb_power(w)
        w = apply_tempered(TemperedOperator(RIGHT, DERIVATIVE, s, lam), w)
        return absorb_power(w)
    if side == "right-first":
        w = apply_tempered(TemperedOperator(RIGHT, DERIVATIVE, s, lam), u)
        w = absorb_power(w)
        w = apply_tempered(TemperedOperator(LEFT, DERIVATIVE, s, lam), w)
        return absorb_power(w)
    raise PreconditionError(f"side must be 'left-first' or 'right-first', got {side!r}")


@dataclass(frozen=True)
class Reflected:
    """The function y -> u(-y) on y <= 0.

    Tempered derivatives swap sides under reflection: the left derivative of
    the reflection at y = -x equals the right derivative of ``u`` at x.
    """

    original: GLFExpansion

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y > 0):
            raise PreconditionError("a reflected expansion lives on y <= 0")
        return expansion_eval(self.original, -y)

    def reflect(self):
        return self.original

    def left_derivative(self, mu, y):
        """Left tempered derivative (base -inf) of the reflection, via the right map of ``u``."""
        u = self.original
        if mu > 0 and _is_integer(mu) and u.params.alpha < 0:
            image = apply_integer_derivative(RIGHT, int(round(mu)), u)
        else:
            image = apply_tempered(TemperedOperator(RIGHT, DERIVATIVE, mu, u.params.lam), u)
        return expansion_eval(image, -np.asarray(y, dtype=float))

    def left_integral(self, mu, y):
        u = self.original
        image = apply_tempered(TemperedOperator(RIGHT, INTEGRAL, mu, u.params.lam), u)
        return expansion_eval(image, -np.asarray(y, dtype=float))


def reflect(u):
    if isinstance(u, Reflected):
        return u.original
    return Reflected(u)
