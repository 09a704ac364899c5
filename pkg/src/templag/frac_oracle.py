"""Brute-force tempered fractional calculus by quadrature.

This module deliberately knows nothing about Laguerre functions.  Integrals
are computed panel by panel with Gauss rules whose weight absorbs the weakly
singular kernel, the rule size is doubled until two estimates agree, and
derivatives are taken by Richardson-extrapolated central differences of the
fractional integral.  Every function accepts a scalar or an array of
evaluation points.
"""

from dataclasses import dataclass, field
import math
import os

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, NumericError, PreconditionError
from .specfun import gauss_jacobi

BASE_ZERO = 0.0
BASE_NEG_INF = -math.inf

_FIRST_SIZE = 200
_DEFAULT_CAP = 1600
_AGREE = 1e-11
_ENVELOPE = math.log(1e18)


@dataclass(frozen=True)
class Callable1D:
    """A real function plus hints used to build quadrature panels.

    decay: exponential rate r with |f(y)| <~ exp(-r |y|) away from the origin.
    power: algebraic exponent b with f(y) ~ y^b as y -> 0+ (for base-0 work).
    breaks: points where f or a derivative jumps; panels are split there.
    """

    evaluator: object
    decay: float = None
    power: float = 0.0
    breaks: tuple = field(default_factory=tuple)

    def __call__(self, y):
        return self.evaluator(y)


def as_callable(f, **hints):
    if isinstance(f, Callable1D):
        return f
    return Callable1D(f, **hints)


def quad_cap():
    raw = os.environ.get("TEMPLAG_QUAD_CAP")
    if raw is None:
        return _DEFAULT_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise PreconditionError(f"TEMPLAG_QUAD_CAP must be an integer, got {raw!r}") from exc
    if cap < _FIRST_SIZE:
        raise PreconditionError(f"TEMPLAG_QUAD_CAP must be >= {_FIRST_SIZE}, got {cap}")
    return cap


def _panel_ends(start, stop, breaks):
    """Ordered panel endpoints between start and stop (either direction)."""
    lo, hi = min(start, stop), max(start, stop)
    inner = sorted(b for b in breaks if lo < b < hi)
    pts = [start] + (inner if start < stop else inner[::-1]) + [stop]
    return pts


def _kernel_panels(f, x, mu, lam, side, lower):
    """Panels (start, stop, kernel_at_stop, power_at_start) for one point x.

    The integration variable runs from start (t=0) to stop (t=1).  When
    kernel_at_stop is set the panel ends at x and the Gauss-Jacobi weight
    (1-t)^{mu-1} absorbs the kernel; power_at_start is the exponent absorbed
    at t=0 (the power hint at the origin).
    """
    if side == "left":
        if lower == BASE_NEG_INF:
            rate = lam + f.decay
            lo = min([x, 0.0] + [b for b in f.breaks if b < x]) - _ENVELOPE / rate
        else:
            lo = lower
        ends = _panel_ends(lo, x, f.breaks)
        last = len(ends) - 2
        return [
            (ends[i], ends[i + 1], i == last,
             f.power if (lower == BASE_ZERO and i == 0) else 0.0)
            for i in range(len(ends) - 1)
        ]
    rate = lam + f.decay
    hi = max([x, 0.0] + [b for b in f.breaks if b > x]) + _ENVELOPE / rate
    ends = _panel_ends(x, hi, f.breaks)
    return [(ends[i + 1], ends[i], i == 0, 0.0) for i in range(len(ends) - 1)]


def _kernel_integral_once(f, xs, mu, lam, side, lower, n):
    vals = np.empty(len(xs))
    scale = np.empty(len(xs))
    for i, x in enumerate(xs):
        total = 0.0
        mag = 0.0
        for start, stop, at_x, power in _kernel_panels(f, x, mu, lam, side, lower):
            width = abs(stop - start)
            rule = gauss_jacobi(mu - 1.0 if at_x else 0.0, power, n)
            t = rule.nodes
            y = start + (stop - start) * t
            g = np.asarray(f(y), dtype=float) * np.exp(-lam * np.abs(x - y))
            if at_x:
                g = g * width ** (mu - 1.0)
            else:
                g = g * np.abs(x - y) ** (mu - 1.0)
            if power != 0.0:
                g = g / t**power
            w = rule.weights * width
            total += np.dot(w, g)
            mag += np.dot(w, np.abs(g))
        vals[i] = total
        scale[i] = mag
    return vals, scale


def _kernel_integral(f, x, mu, lam, side, lower):
    """(1/Gamma(mu)) int exp(-lam |x-y|) |x-y|^{mu-1} f(y) dy over the side's range."""
    if not mu > 0:
        raise DomainError(f"integral order must be positive, got {mu}")
    x = np.asarray(x, dtype=float)
    xs = np.atleast_1d(x).ravel()
    cap = quad_cap()
    n = _FIRST_SIZE
    worst = math.inf
    prev, _ = _kernel_integral_once(f, xs, mu, lam, side, lower, n)
    while True:
        n2 = min(2 * n, cap)
        if n2 == n:
            raise NumericError("oracle quadrature did not converge", cap=cap, worst=worst)
        cur, scale = _kernel_integral_once(f, xs, mu, lam, side, lower, n2)
        rel = np.abs(cur - prev) / np.maximum(scale, 1e-300)
        worst = float(rel.max())
        if worst <= _AGREE:
            break
        prev, n = cur, n2
    out = (cur * math.exp(-gammaln(mu))).reshape(x.shape)
    return float(out) if out.ndim == 0 else out


def rl_left_integral(f, a, mu, x):
    """Riemann-Liouville left integral of order mu with lower limit a."""
    f = as_callable(f)
    if np.any(np.asarray(x) <= a):
        raise DomainError("evaluation points must exceed the lower limit")
    g = f
    if a != 0:
        g = Callable1D(lambda y: f(y + a), f.decay, f.power, tuple(b - a for b in f.breaks))
        return _kernel_integral(g, np.asarray(x, dtype=float) - a, mu, 0.0, "left", BASE_ZERO)
    return _kernel_integral(g, x, mu, 0.0, "left", BASE_ZERO)


def _check_base(f, base):
    if base == BASE_NEG_INF:
        if f.decay is None:
            raise PreconditionError("a decay hint is required for base -inf")
    elif base != BASE_ZERO:
        raise PreconditionError(f"base must be 0 or -inf, got {base}")


def tempered_left_integral(f, mu, lam, base, x):
    """Left tempered integral exp(-lam x) I^mu[exp(lam .) f] with lower limit base."""
    f = as_callable(f)
    _check_base(f, base)
    if base == BASE_ZERO and np.any(np.asarray(x) <= 0):
        raise DomainError("base-0 operators are evaluated at x > 0")
    return _kernel_integral(f, x, mu, lam, "left", base)


def tempered_right_integral(f, mu, lam, x):
    """Right tempered integral exp(lam x) I_right^mu[exp(-lam .) f] over (x, inf)."""
    f = as_callable(f)
    if f.decay is None:
        raise PreconditionError("a decay hint is required for right operators")
    return _kernel_integral(f, x, mu, lam, "right", None)


_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_OFFSETS = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])


def _difference_steps(x, base, k=1):
    # second differences are roundoff-limited at the first-order step size
    if k == 1:
        h = np.maximum(1e-4, 1e-3 * np.abs(x))
    else:
        h = np.maximum(1e-2, 1e-2 * np.abs(x))
    if base == BASE_ZERO:
        h = np.minimum(h, x / 4.0)
    return h


def _shifted_derivative(F, x, h, k, shift):
    """(D + shift)^k F at x for k in {1, 2} by Richardson-extrapolated differences.

    F maps a flat array of abscissae to values; all stencil points are
    evaluated in one call so that a shared quadrature size is used.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    pts = [x[:, None] + _OFFSETS[None, :] * h[:, None],
           x[:, None] + _OFFSETS[None, :] * (0.5 * h)[:, None]]
    flat = np.concatenate([p.ravel() for p in pts])
    vals = np.asarray(F(flat), dtype=float)
    m = len(x)
    coarse = vals[: 5 * m].reshape(m, 5)
    fine = vals[5 * m:].reshape(m, 5)
    f0 = fine[:, 2]
    d1c = coarse @ _D1 / h
    d1f = fine @ _D1 / (0.5 * h)
    d1 = (16.0 * d1f - d1c) / 15.0
    scale = np.abs(fine).max(axis=1)
    if k == 1:
        est = d1 + shift * f0
        spread = np.abs(d1f - d1c)
        ref = np.abs(d1) + np.abs(shift) * scale
    else:
        d2c = coarse @ _D2 / h**2
        d2f = fine @ _D2 / (0.25 * h**2)
        d2 = (16.0 * d2f - d2c) / 15.0
        est = d2 + 2.0 * shift * d1 + shift**2 * f0
        spread = np.abs(d2f - d2c)
        ref = np.abs(d2) + np.abs(2.0 * shift * d1) + shift**2 * scale
    if np.any(~np.isfinite(est)) or np.any(spread > 1e-4 * ref + 1e-300):
        raise NumericError("finite-difference estimates disagree", points=x.tolist())
    return est


def _split_order(mu):
    k = int(math.floor(mu)) + 1
    return k, k - mu


def tempered_left_derivative(f, mu, lam, base, x):
    """Left tempered derivative (D + lam)^k of the order-(k - mu) tempered integral."""
    f = as_callable(f)
    _check_base(f, base)
    if not 0 <= mu < 2:
        raise DomainError(f"derivative order must lie in [0, 2), got {mu}")
    x = np.asarray(x, dtype=float)
    if base == BASE_ZERO and np.any(x <= 0):
        raise DomainError("base-0 operators are evaluated at x > 0")
    if mu == 0:
        out = np.asarray(f(x), dtype=float)
        return float(out) if out.ndim == 0 else out
    if mu == int(mu):
        F = f
        k = int(mu)
    else:
        k, rest = _split_order(mu)
        F = lambda y: _kernel_integral(f, y, rest, lam, "left", base)
    h = _difference_steps(np.atleast_1d(x).ravel(), base, k)
    out = _shifted_derivative(F, x, h, k, lam).reshape(x.shape)
    return float(out) if out.ndim == 0 else out


def tempered_right_derivative(f, mu, lam, x):
    """Right tempered derivative (-1)^k (D - lam)^k of the order-(k - mu) right integral."""
    f = as_callable(f)
    if f.decay is None:
        raise PreconditionError("a decay hint is required for right operators")
    if not 0 <= mu < 2:
        raise DomainError(f"derivative order must lie in [0, 2), got {mu}")
    x = np.asarray(x, dtype=float)
    if mu == 0:
        out = np.asarray(f(x), dtype=float)
        return float(out) if out.ndim == 0 else out
    if mu == int(mu):
        F = f
        k = int(mu)
    else:
        k, rest = _split_order(mu)
        F = lambda y: _kernel_integral(f, y, rest, lam, "right", None)
    h = _difference_steps(np.atleast_1d(x).ravel(), None, k)
    out = ((-1.0) ** k * _shifted_derivative(F, x, h, k, -lam)).reshape(x.shape)
    return float(out) if out.ndim == 0 else out
