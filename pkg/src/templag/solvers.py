"""Spectral solvers: the half-line model problem, the half-line tempered
diffusion equation, and the two-domain whole-line diffusion equation.

Time stepping is explicit SSP-RK3 on M c' = F(t) - A c.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.special import gammaln

from .approx import project_pos
from .errors import DomainError, NumericError, PreconditionError
from .frac_oracle import Callable1D
from .glf_core import GLFExpansion, GLFParams, glf_table
from .specfun import exp_sinh, gamma_ratio, gauss_jacobi, gauss_laguerre, gauss_legendre, laguerre_table


# ---------------------------------------------------------------- model problem


@dataclass(frozen=True)
class ModelProblem:
    """Tempered fractional equation D^{s,lam} u = f on the half line."""

    s: float
    lam: float
    f: object

    def __post_init__(self):
        if not 0 <= self.s < 2:
            raise DomainError(f"model order s must lie in [0, 2), got {self.s}")
        if not self.lam > 0:
            raise DomainError(f"tempering rate must be positive, got {self.lam}")


def solve_model(problem, N):
    """Petrov-Galerkin solution: trial family alpha = -s, test family alpha = 0.

    The system is diagonal, u_n = f_n / h_n^{s,s}, so that the left tempered
    derivative of order s maps u_N exactly onto the projection of f.
    """
    s, lam = problem.s, problem.lam
    power = problem.f.power if isinstance(problem.f, Callable1D) else 0.0
    fhat = project_pos(problem.f, 0.0, lam, N, power=power).coeffs
    coeffs = fhat / gamma_ratio(s, s, np.arange(N + 1))
    return GLFExpansion(GLFParams(-s, lam), coeffs)


_EXACT_FIRST = 64
_EXACT_CAP = 2048
_EXACT_AGREE = 1e-13


def exact_model_solution(problem, x):
    """Tempered integral of order s of f:

        x^s / Gamma(s) * int_0^1 (1-t)^{s-1} exp(-lam (1-t) x) f(x t) dt,

    by Gauss-Jacobi rules doubled until two sizes agree.
    """
    s, lam = problem.s, problem.lam
    if s == 0:
        raise DomainError("the integral representation needs s > 0")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("the model solution lives on x >= 0")
    xs = np.atleast_1d(x).ravel()

    def once(n):
        rule = gauss_jacobi(s - 1.0, 0.0, n)
        t = rule.nodes
        pts = xs[:, None] * t[None, :]
        g = np.asarray(problem.f(pts.ravel()), dtype=float).reshape(pts.shape)
        g = g * np.exp(-lam * (1.0 - t)[None, :] * xs[:, None])
        return g @ rule.weights, np.abs(g) @ rule.weights

    n = _EXACT_FIRST
    prev, _ = once(n)
    while True:
        n *= 2
        if n > _EXACT_CAP:
            raise NumericError("model solution quadrature did not converge", cap=_EXACT_CAP)
        cur, scale = once(n)
        if np.all(np.abs(cur - prev) <= _EXACT_AGREE * np.maximum(scale, 1e-300)):
            break
        prev = cur
    out = (xs**s * cur * math.exp(-gammaln(s))).reshape(x.shape)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- discrete systems


@dataclass(eq=False)
class DiscreteSystem:
    """Mass matrix, stiffness matrix and load of M c' = F(t) - A c.

    ``basis_values(x)`` returns the basis sampled at x, shape (dim, len(x));
    ``project(g)`` returns the vector (g, phi_i).
    """

    M: np.ndarray
    A: np.ndarray
    load: object
    basis_values: object
    project: object
    blocks: object = None
    factor: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.M.shape != self.A.shape or self.M.shape[0] != self.M.shape[1]:
            raise PreconditionError("mass and stiffness matrices must be square and equal-sized")
        try:
            self.factor = cho_factor(self.M)
        except LinAlgError as exc:
            raise NumericError("mass matrix is not positive definite") from exc

    @property
    def dim(self):
        return self.M.shape[0]

    def initial_coefficients(self, u0):
        """Galerkin projection of u0: solve M c0 = (u0, phi)."""
        return cho_solve(self.factor, self.project(u0))

    def evaluate(self, c, x):
        x = np.asarray(x, dtype=float)
        vals = np.asarray(c) @ self.basis_values(np.atleast_1d(x).ravel())
        return vals.reshape(x.shape)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    coeffs: np.ndarray
    system: DiscreteSystem

    def values(self, x, index=-1):
        return self.system.evaluate(self.coeffs[index], x)


def _zero_load(dim):
    z = np.zeros(dim)
    return lambda t: z


def rk3_integrate(system, c0, h, T, output_times=None):
    """SSP-RK3 (Shu-Osher) for M c' = F(t) - A c from t=0 to T.

    Steps are shortened uniformly inside each output interval so that every
    requested time is hit exactly.
    """
    if not (h > 0 and T > 0):
        raise PreconditionError(f"need h > 0 and T > 0, got h={h}, T={T}")
    if h > T * (1 + 1e-12):
        raise PreconditionError(f"step {h} exceeds final time {T}")
    outs = sorted(set([T] if output_times is None else [float(t) for t in output_times]))
    if outs[0] < 0 or outs[-1] > T * (1 + 1e-12):
        raise PreconditionError("output times must lie in [0, T]")
    A, F, fac = system.A, system.load, system.factor

    def rhs(t, c):
        # non-finite states are caught after each step, not inside the solve
        return cho_solve(fac, F(t) - A @ c, check_finite=False)

    c = np.array(c0, dtype=float)
    t = 0.0
    times, states = [], []
    with np.errstate(over="ignore", invalid="ignore"):
        for target in outs:
            steps = math.ceil((target - t) / h - 1e-9)
            if steps > 0:
                dt = (target - t) / steps
                for _ in range(steps):
                    c1 = c + dt * rhs(t, c)
                    c2 = 0.75 * c + 0.25 * (c1 + dt * rhs(t + dt, c1))
                    c = c / 3.0 + (2.0 / 3.0) * (c2 + dt * rhs(t + 0.5 * dt, c2))
                    t += dt
                    if not np.all(np.isfinite(c)):
                        raise NumericError("time stepping blew up", time=t)
                t = target
            times.append(target)
            states.append(c.copy())
    return Trajectory(np.array(times), np.array(states), system)


def _load_rule(rate, N):
    # the double-exponential step must shrink as the basis oscillates more
    step = 2.0 ** -(6 + max(0, math.ceil(math.log2(max(N, 1) / 8.0))))
    return exp_sinh(rate, step)


# ---------------------------------------------------------------- half line


@dataclass(frozen=True)
class HalfLineTFDE:
    """u_t + (D^{mu,lam} - lam^mu) u = f on x > 0 with u(0, t) = 0.

    ``f(x, t)`` may be None for a zero source.
    """

    mu: float
    lam: float
    f: object
    u0: object
    T: float
    nu: float = 1.0

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise DomainError(f"half-line order must lie in (0, 1), got {self.mu}")
        if not self.lam > 0:
            raise DomainError(f"tempering rate must be positive, got {self.lam}")
        if not (max(0.0, self.mu - 0.5) < self.nu <= 1.0):
            raise PreconditionError(
                f"basis exponent must satisfy max(0, mu - 1/2) < nu <= 1, got nu={self.nu}, mu={self.mu}"
            )
        if not self.T > 0:
            raise DomainError(f"final time must be positive, got {self.T}")


def assemble_half_line(problem, N):
    """Galerkin system on span{GLF_n^{(-nu, lam)}, n <= N}.

    The left derivative of a basis function is x^{nu-mu} e^{-lam x} times
    h_n^{nu,mu} L_n^{(nu-mu)}(2 lam x), so both matrices are exact under
    generalized Gauss-Laguerre rules.
    """
    mu, lam, nu = problem.mu, problem.lam, problem.nu
    n = np.arange(N + 1)
    two_lam = 2.0 * lam

    rm = gauss_laguerre(2.0 * nu, N + 2)
    Lm = laguerre_table(nu, N, rm.nodes)
    M = (Lm * rm.weights) @ Lm.T * two_lam ** (-2.0 * nu - 1.0)

    ra = gauss_laguerre(2.0 * nu - mu, N + 2)
    test = laguerre_table(nu, N, ra.nodes)
    image = laguerre_table(nu - mu, N, ra.nodes) * gamma_ratio(nu, mu, n)[:, None]
    # A[m, n] = (D phi_n, phi_m)
    A = (test * ra.weights) @ image.T * two_lam ** (-(2.0 * nu - mu) - 1.0)
    A = A - lam**mu * M

    params = GLFParams(-nu, lam)
    rule = _load_rule(two_lam, N)
    weighted = glf_table(params, N, rule.nodes) * rule.weights

    def project(g):
        return weighted @ np.asarray(g(rule.nodes), dtype=float)

    if problem.f is None:
        load = _zero_load(N + 1)
    else:
        load = lambda t: weighted @ np.asarray(problem.f(rule.nodes, t), dtype=float)

    return DiscreteSystem(M, A, load, lambda x: glf_table(params, N, x), project)


# ---------------------------------------------------------------- whole line


@dataclass(frozen=True)
class WholeLineTFDE:
    """u_t = (-1)^k C_T {p d_+ u + q d_- u} + f on the real line, mu in (k-1, k).

    d_+ and d_- are the left and right tempered Riesz-type operators with the
    lam^mu (and, for mu > 1, the drift) corrections.  ``f(x, t)`` may be None.
    """

    mu: float
    lam: float
    p: float
    q: float
    C_T: float
    f: object
    u0: object
    T: float

    def __post_init__(self):
        if not (0 < self.mu < 2) or self.mu == 1:
            raise DomainError(f"whole-line order must lie in (0, 1) or (1, 2), got {self.mu}")
        if not self.lam > 0:
            raise DomainError(f"tempering rate must be positive, got {self.lam}")
        if not (0 <= self.p <= 1 and 0 <= self.q <= 1 and abs(self.p + self.q - 1) < 1e-12):
            raise DomainError(f"need p, q in [0, 1] with p + q = 1, got p={self.p}, q={self.q}")
        if not self.T > 0:
            raise DomainError(f"final time must be positive, got {self.T}")


@dataclass(frozen=True)
class TwoDomainBasis:
    """Index 0 is e^{-lam|x|}; then N1 reflected GLFs on x <= 0; then N2 GLFs on x >= 0.

    The half-line members are GLF_n^{(-1, lam)}, which vanish at the interface.
    """

    lam: float
    N1: int
    N2: int

    def __post_init__(self):
        if self.N1 < 1 or self.N2 < 1:
            raise PreconditionError(f"subdomain degrees must be >= 1, got N1={self.N1}, N2={self.N2}")
        if not self.lam > 0:
            raise PreconditionError(f"tempering rate must be positive, got {self.lam}")

    @property
    def dim(self):
        return 1 + self.N1 + self.N2

    @property
    def left_slice(self):
        return slice(1, 1 + self.N1)

    @property
    def right_slice(self):
        return slice(1 + self.N1, self.dim)

    def reflection_permutation(self):
        """Index map of x -> -x on the basis (requires N1 == N2)."""
        if self.N1 != self.N2:
            raise PreconditionError("reflection needs N1 == N2")
        N = self.N1
        return np.concatenate([[0], np.arange(1 + N, 1 + 2 * N), np.arange(1, 1 + N)])

    # per-side factors: every basis function on a side is exp(-lam r) P(r), r = |x|

    def value_factors(self, side, r):
        out = np.zeros((self.dim, len(r)))
        out[0] = 1.0
        sl, N = (self.left_slice, self.N1) if side == "left" else (self.right_slice, self.N2)
        out[sl] = r * laguerre_table(1.0, N - 1, 2.0 * self.lam * r)
        return out

    def slope_factors(self, side, r):
        """d/dx on the side, divided by exp(-lam r)."""
        lam = self.lam
        out = np.zeros((self.dim, len(r)))
        sl, N = (self.left_slice, self.N1) if side == "left" else (self.right_slice, self.N2)
        y = 2.0 * lam * r
        L = laguerre_table(1.0, N - 1, y)
        dL = np.zeros_like(L)
        if N > 1:
            dL[1:] = -laguerre_table(2.0, N - 2, y)
        # d/dr of r e^{-lam r} L_n(2 lam r), without the exponential
        g = L + 2.0 * lam * r * dL - lam * r * L
        if side == "left":
            out[0] = lam
            out[sl] = -g
        else:
            out[0] = -lam
            out[sl] = g
        return out

    def __call__(self, x):
        """Basis values at x, shape (dim, len(x))."""
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        r = np.abs(x)
        left = x < 0
        out = np.where(left[None, :], self.value_factors("left", r), self.value_factors("right", r))
        # members of the other subdomain vanish
        out[self.right_slice, :] *= ~left
        out[self.left_slice, :] *= left
        return out * np.exp(-self.lam * r)


def build_two_domain_basis(lam, N1, N2):
    return TwoDomainBasis(float(lam), int(N1), int(N2))


class TemperedBasisDerivatives:
    """Closed-form left derivative of order s (base -inf) and first-order
    right derivative -(d/dx - lam) of every two-domain basis member.

    On x > 0 the left derivative of the members living on x <= 0 is the
    tail exp(lam x)/Gamma(1-s) int_x^inf exp(-2 lam t) t^{-s} Q(t - x) dt,
    where exp(-lam r) Q(r) is (d/dx + lam) of the member at x = -r.
    """

    def __init__(self, basis, s):
        if not 0 < s < 1:
            raise PreconditionError(f"fractional order must lie in (0, 1), got {s}")
        self.basis = basis
        self.s = float(s)

    def left_local_factors(self, side, r):
        """Left derivative on its own side, divided by exp(-lam r)
        (and by r^{1-s} on the right side)."""
        b, s, lam = self.basis, self.s, self.basis.lam
        out = np.zeros((b.dim, len(r)))
        y = 2.0 * lam * r
        if side == "left":
            out[0] = (2.0 * lam) ** s
            n = np.arange(b.N1)
            L = laguerre_table(s - 1.0, b.N1, y)[1:]
            out[b.left_slice] = -(2.0 * lam) ** (s - 1.0) * (n + 1.0)[:, None] * L
        else:
            n = np.arange(b.N2)
            L = laguerre_table(1.0 - s, b.N2 - 1, y)
            out[b.right_slice] = gamma_ratio(1.0, s, n)[:, None] * L
        return out

    def tail_sources(self, rho):
        """Q(rho) for every member (zero rows for the right-side members)."""
        b, lam = self.basis, self.basis.lam
        out = np.zeros((b.dim,) + np.shape(rho))
        out[0] = 2.0 * lam
        n = np.arange(b.N1)
        L = laguerre_table(0.0, b.N1, 2.0 * lam * np.asarray(rho))[1:]
        out[b.left_slice] = -(n + 1.0).reshape((-1,) + (1,) * np.ndim(rho)) * L
        return out

    def _tail(self, x):
        """Tail integrals at x > 0, shape (dim, len(x))."""
        b, s, lam = self.basis, self.s, self.basis.lam
        size = max(b.N1, b.N2) + 48
        out = np.empty((b.dim, len(x)))
        gj = gauss_jacobi(0.0, -s, size)
        gl = gauss_legendre(size)
        lag = gauss_laguerre(0.0, size)
        scale = math.exp(-gammaln(1.0 - s))
        for i, xi in enumerate(x):
            upper = xi + 2.0 / lam
            total = np.zeros(b.dim)
            # the prefactor exp(lam x) is folded into each exponential so large x cannot overflow
            # [x, upper]: weight t^{-s}, near-singular only when x is small
            if xi < 1.0 / lam:
                for end, sign in ((upper, 1.0), (xi, -1.0)):
                    t = end * gj.nodes
                    vals = self.tail_sources(t - xi) * np.exp(lam * xi - 2.0 * lam * t)
                    total += sign * end ** (1.0 - s) * (vals @ gj.weights)
            else:
                t = xi + (upper - xi) * gl.nodes
                vals = self.tail_sources(t - xi) * np.exp(lam * xi - 2.0 * lam * t) * t ** (-s)
                total += (upper - xi) * (vals @ gl.weights)
            # [upper, inf): smooth
            t = upper + lag.nodes / (2.0 * lam)
            vals = self.tail_sources(t - xi) * t ** (-s)
            total += math.exp(lam * xi - 2.0 * lam * upper) / (2.0 * lam) * (vals @ lag.weights)
            out[:, i] = total * scale
        return out

    def left_fractional(self, x):
        """Left tempered derivative of order s of every member at x, shape (dim, len(x))."""
        lam, s = self.basis.lam, self.s
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        r = np.abs(x)
        out = np.zeros((self.basis.dim, len(x)))
        neg = x <= 0
        if np.any(neg):
            out[:, neg] = self.left_local_factors("left", r[neg]) * np.exp(-lam * r[neg])
        pos = ~neg
        if np.any(pos):
            xp = x[pos]
            local = self.left_local_factors("right", xp) * (xp ** (1.0 - s) * np.exp(-lam * xp))
            out[:, pos] = local + self._tail(xp)
        return out

    def right_first(self, x):
        """-(d/dx - lam) of every member at x, shape (dim, len(x))."""
        b, lam = self.basis, self.basis.lam
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        r = np.abs(x)
        out = np.zeros((b.dim, len(x)))
        neg = x < 0
        y = 2.0 * lam * r
        env = np.exp(-lam * r)
        out[0] = np.where(neg, 0.0, 2.0 * lam * env)
        n = np.arange(b.N1)
        out[b.left_slice] = np.where(neg, (n + 1.0)[:, None] * laguerre_table(0.0, b.N1 - 1, y) * env, 0.0)
        n = np.arange(b.N2)
        out[b.right_slice] = np.where(
            neg, 0.0, -(n + 1.0)[:, None] * laguerre_table(0.0, b.N2, y)[1:] * env
        )
        return out


def basis_tempered_derivatives(basis, s):
    return TemperedBasisDerivatives(basis, s)


@dataclass(frozen=True)
class WholeLineBlocks:
    """Raw pairings of the two-domain basis; entry [i, j] pairs member j's
    image with member i.

    mass:   (phi_j, phi_i)
    frac:   (D_left^s phi_j, phi_i)
    frac_slope: (D_left^s phi_j, phi_i')
    slope:  (phi_j', phi_i)
    """

    lam: float
    mass: np.ndarray
    frac: np.ndarray
    frac_slope: np.ndarray
    slope: np.ndarray

    @property
    def frac_right_first(self):
        """(D_left^s phi_j, D_right^1 phi_i) with D_right^1 = -(d/dx - lam)."""
        return -self.frac_slope + self.lam * self.frac


def whole_line_blocks(basis, s):
    """Every pairing computed directly from the per-side representation.

    Same-side products are exact under Gauss-Laguerre rules (weight r^{1-s}
    for the local right-side derivative).  Tail pairings reduce, after
    swapping the order of integration, to

        1/Gamma(1-s) int_0^inf e^{-2 lam t} t^{1-s} int_0^1 R(t xi) Q(t (1-xi)) dxi dt,

    which is exact under an outer Gauss-Laguerre and inner Gauss-Legendre rule.
    """
    ops = TemperedBasisDerivatives(basis, s)
    lam = basis.lam
    two_lam = 2.0 * lam
    size = max(basis.N1, basis.N2) + 8

    r0 = gauss_laguerre(0.0, size)
    x0 = r0.nodes / two_lam
    w0 = r0.weights / two_lam
    r1 = gauss_laguerre(1.0 - s, size)
    x1 = r1.nodes / two_lam
    w1 = r1.weights * two_lam ** (s - 2.0)

    mass = np.zeros((basis.dim, basis.dim))
    frac = np.zeros_like(mass)
    frac_slope = np.zeros_like(mass)
    slope = np.zeros_like(mass)
    for side in ("left", "right"):
        V = basis.value_factors(side, x0)
        S = basis.slope_factors(side, x0)
        mass += (V * w0) @ V.T
        slope += (V * w0) @ S.T
        if side == "left":
            F = ops.left_local_factors("left", x0)
            frac += (V * w0) @ F.T
            frac_slope += (S * w0) @ F.T
        else:
            F = ops.left_local_factors("right", x1)
            frac += (basis.value_factors("right", x1) * w1) @ F.T
            frac_slope += (basis.slope_factors("right", x1) * w1) @ F.T

    leg = gauss_legendre(size)
    t = x1[:, None] * leg.nodes[None, :]
    rho = x1[:, None] * (1.0 - leg.nodes)[None, :]
    Q = ops.tail_sources(rho)
    R = basis.value_factors("right", t.ravel()).reshape((basis.dim,) + t.shape)
    Rs = basis.slope_factors("right", t.ravel()).reshape((basis.dim,) + t.shape)
    scale = math.exp(-gammaln(1.0 - s))
    frac += scale * np.einsum("ikl,jkl,k,l->ij", R, Q, w1, leg.weights)
    frac_slope += scale * np.einsum("ikl,jkl,k,l->ij", Rs, Q, w1, leg.weights)

    return WholeLineBlocks(lam, mass, frac, frac_slope, slope)


def whole_line_stiffness(problem, blocks):
    mu, lam, p, q, C = problem.mu, problem.lam, problem.p, problem.q, problem.C_T
    if mu < 1:
        B = blocks.frac
        return C * (p * B + q * B.T - lam**mu * blocks.mass)
    s = mu - 1.0
    E = blocks.frac_right_first
    return C * (-p * E - q * E.T + lam**mu * blocks.mass + (p - q) * mu * lam**s * blocks.slope)


def assemble_whole_line(problem, basis):
    if not math.isclose(problem.lam, basis.lam, rel_tol=1e-14):
        raise PreconditionError("problem and basis tempering rates differ")
    s = problem.mu if problem.mu < 1 else problem.mu - 1.0
    blocks = whole_line_blocks(basis, s)
    A = whole_line_stiffness(problem, blocks)
    if not np.all(np.isfinite(A)):
        raise NumericError("non-finite stiffness entries", block="A")

    lam = basis.lam
    rule = _load_rule(lam, max(basis.N1, basis.N2))
    r = rule.nodes
    env = np.exp(-lam * r) * rule.weights
    VL = basis.value_factors("left", r) * env
    VR = basis.value_factors("right", r) * env

    def project(g):
        return VL @ np.asarray(g(-r), dtype=float) + VR @ np.asarray(g(r), dtype=float)

    if problem.f is None:
        load = _zero_load(basis.dim)
    else:
        load = lambda t: VL @ np.asarray(problem.f(-r, t), dtype=float) + VR @ np.asarray(
            problem.f(r, t), dtype=float
        )
    return DiscreteSystem(blocks.mass, A, load, basis, project, blocks)


# ---------------------------------------------------------------- driver


def solve_tfde(problem, discretization, h, output_times=None):
    """Assemble, project u0 and integrate to the requested times.

    ``discretization`` is the degree N for a half-line problem or a
    TwoDomainBasis for a whole-line problem.
    """
    if isinstance(problem, HalfLineTFDE):
        system = assemble_half_line(problem, int(discretization))
    elif isinstance(problem, WholeLineTFDE):
        system = assemble_whole_line(problem, discretization)
    else:
        raise PreconditionError(f"unsupported problem type {type(problem).__name__}")
    c0 = system.initial_coefficients(problem.u0)
    return rk3_integrate(system, c0, h, problem.T, output_times)
