"""Experiment runner: ``templag <experiment> --config <path> [--key value ...]``.

Each experiment writes one CSV table.  Exit codes: 0 ok, 2 config error,
3 numeric failure.
"""

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import frac_oracle as fo
from .approx import WeightedNorm, rate_fit, weighted_error
from .errors import DomainError, NumericError, PreconditionError
from .glf_core import (
    DERIVATIVE,
    GLFExpansion,
    GLFParams,
    INTEGRAL,
    LEFT,
    RIGHT,
    TemperedOperator,
    apply_integer_derivative,
    apply_tempered,
    sl_chain,
    sl_eigenvalue,
)
from .solvers import (
    HalfLineTFDE,
    ModelProblem,
    WholeLineTFDE,
    build_two_domain_basis,
    exact_model_solution,
    solve_model,
    solve_tfde,
)

EXPERIMENTS = ("model-problem", "half-line", "whole-line", "convergence", "operator-check")
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- catalog
# time-dependent entries are built from (mu, lam); the model problem's source takes x only


def _case_i_source(x, t, mu, lam):
    env = np.exp(-lam * x)
    return -x * env * math.sin(t) + (x ** (1 - mu) / math.gamma(2 - mu) - lam**mu * x) * env * math.cos(t)


SOURCES = {
    "zero-f": None,
    "case-i": lambda mu, lam: (lambda x, t: _case_i_source(x, t, mu, lam)),
    "case-ii": lambda mu, lam: (lambda x, t: np.cos(x) * np.exp(-x) * math.sin(t)),
    "gaussian": lambda mu, lam: (lambda x, t: math.cos(t) * np.exp(-x * x)),
}

INITIAL = {
    "zero": lambda lam: (lambda x: np.zeros_like(x)),
    "case-i": lambda lam: (lambda x: x * np.exp(-lam * x)),
    "x-exp": lambda lam: (lambda x: x * np.exp(-x)),
    "gaussian": lambda lam: (lambda x: 10.0 * np.exp(-4.0 * x * x)),
    "exp-abs": lambda lam: (lambda x: 10.0 * np.exp(-5.0 * np.abs(x))),
}

MODEL_SOURCES = {
    "e-sinx": fo.Callable1D(lambda x: np.exp(-x) * np.sin(x), decay=1.0, power=1.0),
}


# ---------------------------------------------------------------- configuration


def _floats(text):
    return [float(v) for v in str(text).replace(",", " ").split()]


def _ints(text):
    return [int(v) for v in str(text).replace(",", " ").split()]


REQUIRED = object()


@dataclass(frozen=True)
class Key:
    parse: object
    default: object = REQUIRED


COMMON = {
    "output": Key(str, "-"),
    "x_points": Key(int, 401),
    "x_max": Key(float, None),
}
TIME = {
    "mu": Key(float),
    "lam": Key(float),
    "h": Key(float, 1e-3),
    "T": Key(float),
    "times": Key(_floats, None),
    "source": Key(str, "zero-f"),
    "initial": Key(str, "zero"),
}
HALF = {"nu": Key(float, 1.0), "N": Key(int, 32)}
WHOLE = {"p": Key(float, 0.5), "q": Key(float, 0.5), "C_T": Key(float, 1.0), "N1": Key(int, 32), "N2": Key(int, 32)}

SCHEMAS = {
    "model-problem": {
        **COMMON,
        "s": Key(float),
        "lam": Key(float),
        "source": Key(str, "e-sinx"),
        "N_list": Key(_ints, [8, 16, 32, 64]),
    },
    "half-line": {**COMMON, **TIME, **HALF},
    "whole-line": {**COMMON, **TIME, **WHOLE},
    "convergence": {
        **COMMON,
        **TIME,
        **HALF,
        **WHOLE,
        "problem": Key(str, "half-line"),
        "N_list": Key(_ints, [8, 16, 32, 64]),
        "reference_N": Key(int, None),
    },
    "operator-check": {
        **COMMON,
        "lam": Key(float, 0.8),
        "mu_list": Key(_floats, [0.3, 0.5, 0.9, 1.5]),
        "nu_list": Key(_floats, [1.0, 2.0]),
        "max_mode": Key(int, 10),
        "tolerance": Key(float, 1e-6),
    },
}


def read_config_file(path):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for number, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def parse_overrides(tokens):
    values = {}
    it = iter(tokens)
    for token in it:
        if not token.startswith("--"):
            raise ConfigError(f"unexpected argument {token!r}")
        key = token[2:].replace("-", "_")
        try:
            values[key] = next(it)
        except StopIteration:
            raise ConfigError(f"missing value for {token}") from None
    return values


def build_config(experiment, raw):
    schema = SCHEMAS[experiment]
    if "experiment" in raw and raw["experiment"] != experiment:
        raise ConfigError(f"config is for {raw['experiment']!r}, not {experiment!r}")
    unknown = sorted(set(raw) - set(schema) - {"experiment"})
    if unknown:
        raise ConfigError(f"unknown keys for {experiment}: {', '.join(unknown)}")
    cfg = {}
    for key, spec in schema.items():
        if key in raw:
            try:
                cfg[key] = spec.parse(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw[key]!r}") from exc
        elif spec.default is REQUIRED:
            raise ConfigError(f"missing required key {key}")
        else:
            cfg[key] = spec.default
    return cfg


# ---------------------------------------------------------------- problem construction


def _pick(table, name, kind):
    if name not in table:
        raise ConfigError(f"unknown {kind} {name!r}; choose from {', '.join(sorted(table))}")
    return table[name]


def half_line_problem(cfg):
    src = _pick(SOURCES, cfg["source"], "source")
    init = _pick(INITIAL, cfg["initial"], "initial condition")
    f = None if src is None else src(cfg["mu"], cfg["lam"])
    return HalfLineTFDE(cfg["mu"], cfg["lam"], f, init(cfg["lam"]), cfg["T"], nu=cfg["nu"])


def whole_line_problem(cfg):
    src = _pick(SOURCES, cfg["source"], "source")
    init = _pick(INITIAL, cfg["initial"], "initial condition")
    if cfg["source"] in ("case-i", "case-ii"):
        raise ConfigError(f"source {cfg['source']!r} is defined on the half line only")
    f = None if src is None else src(cfg["mu"], cfg["lam"])
    return WholeLineTFDE(cfg["mu"], cfg["lam"], cfg["p"], cfg["q"], cfg["C_T"], f, init(cfg["lam"]), cfg["T"])


def _grid(cfg, whole):
    x_max = cfg["x_max"] if cfg["x_max"] is not None else 10.0 / cfg["lam"]
    lo = -x_max if whole else 0.0
    return np.linspace(lo, x_max, cfg["x_points"])


def _times(cfg):
    return cfg["times"] if cfg["times"] else [cfg["T"]]


# ---------------------------------------------------------------- experiments


def run_model_problem(cfg):
    f = _pick(MODEL_SOURCES, cfg["source"], "source")
    problem = ModelProblem(cfg["s"], cfg["lam"], f)
    exact = lambda x: exact_model_solution(problem, x)
    errors = []
    for N in cfg["N_list"]:
        uN = solve_model(problem, N)
        errors.append((N, weighted_error(exact, uN, WeightedNorm(-cfg["s"]), power=cfg["s"])))
    return _convergence_rows(errors)


def _convergence_rows(errors):
    slope = rate_fit(errors) if len(errors) >= 3 and all(e > 0 for _, e in errors) else float("nan")
    return ["N", "error", "fitted_slope"], [(N, e, slope) for N, e in errors]


def _snapshot_rows(trajectory, x):
    rows = []
    for k, t in enumerate(trajectory.times):
        u = trajectory.values(x, k)
        rows.extend((t, xi, ui) for xi, ui in zip(x, u))
    return ["t", "x", "u"], rows


def run_half_line(cfg):
    problem = half_line_problem(cfg)
    tr = solve_tfde(problem, cfg["N"], cfg["h"], _times(cfg))
    return _snapshot_rows(tr, _grid(cfg, whole=False))


def run_whole_line(cfg):
    problem = whole_line_problem(cfg)
    basis = build_two_domain_basis(cfg["lam"], cfg["N1"], cfg["N2"])
    tr = solve_tfde(problem, basis, cfg["h"], _times(cfg))
    return _snapshot_rows(tr, _grid(cfg, whole=True))


def run_convergence(cfg):
    """Max-norm error on the output grid at T against the exact solution
    (half-line case-i data) or against a reference run at reference_N."""
    kind = cfg["problem"]
    if kind not in ("half-line", "whole-line"):
        raise ConfigError(f"problem must be half-line or whole-line, got {kind!r}")
    whole = kind == "whole-line"
    x = _grid(cfg, whole)
    if whole:
        problem = whole_line_problem(cfg)
        solve = lambda N: solve_tfde(problem, build_two_domain_basis(cfg["lam"], N, N), cfg["h"]).values(x)
    else:
        problem = half_line_problem(cfg)
        solve = lambda N: solve_tfde(problem, N, cfg["h"]).values(x)
    if not whole and cfg["source"] == "case-i" and cfg["initial"] == "case-i":
        reference = x * np.exp(-cfg["lam"] * x) * math.cos(cfg["T"])
    else:
        ref_N = cfg["reference_N"] or 2 * max(cfg["N_list"])
        reference = solve(ref_N)
    errors = [(N, float(np.max(np.abs(solve(N) - reference)))) for N in cfg["N_list"]]
    return _convergence_rows(errors)


# ---------------------------------------------------------------- operator identity suite

ORACLE_POINTS = np.geomspace(0.15, 10.0, 10)


@dataclass(frozen=True)
class OperatorCase:
    """A closed-form map paired with the quadrature oracle for the same operator."""

    label: str
    alpha: float
    lam: float
    closed: object  # GLFExpansion -> GLFExpansion
    oracle: object  # (Callable1D, x) -> values

    def compare(self, n, max_mode=10, x=ORACLE_POINTS):
        """Max-norm relative difference on mode n; annihilated modes are
        compared against the size of the input instead."""
        params = GLFParams(self.alpha, self.lam)
        u = GLFExpansion.mode(params, n, N=max_mode)
        exact = self.closed(u)(x)
        approx = self.oracle(fo.Callable1D(u, decay=self.lam, power=params.singular_power), x)
        scale = np.max(np.abs(exact))
        if scale == 0.0:
            scale = np.max(np.abs(u(x)))
        return float(np.max(np.abs(approx - exact)) / scale)


def operator_cases(mus=(0.3, 0.5, 0.9, 1.5), nus=(1.0, 2.0), lam=0.8):
    def tempered(side, kind, mu):
        return lambda u: apply_tempered(TemperedOperator(side, kind, mu, lam), u)

    cases = []
    for nu in nus:
        for mu in mus:
            cases.append(OperatorCase(
                f"left-integral nu={nu:g} mu={mu:g}", -nu, lam, tempered(LEFT, INTEGRAL, mu),
                lambda f, x, mu=mu: fo.tempered_left_integral(f, mu, lam, fo.BASE_ZERO, x),
            ))
            if nu >= mu:
                cases.append(OperatorCase(
                    f"left-derivative nu={nu:g} mu={mu:g}", -nu, lam, tempered(LEFT, DERIVATIVE, mu),
                    lambda f, x, mu=mu: fo.tempered_left_derivative(f, mu, lam, fo.BASE_ZERO, x),
                ))
                cases.append(OperatorCase(
                    f"right-integral nu={nu:g} mu={mu:g}", nu, lam, tempered(RIGHT, INTEGRAL, mu),
                    lambda f, x, mu=mu: fo.tempered_right_integral(f, mu, lam, x),
                ))
            cases.append(OperatorCase(
                f"right-derivative nu={nu:g} mu={mu:g}", nu, lam, tempered(RIGHT, DERIVATIVE, mu),
                lambda f, x, mu=mu: fo.tempered_right_derivative(f, mu, lam, x),
            ))
        integer_oracles = {
            LEFT: lambda f, x: fo.tempered_left_derivative(f, 1.0, lam, fo.BASE_ZERO, x),
            RIGHT: lambda f, x: fo.tempered_right_derivative(f, 1.0, lam, x),
        }
        for side, call in integer_oracles.items():
            cases.append(OperatorCase(
                f"integer-{side} k=1 nu={nu:g}", -nu, lam,
                lambda u, side=side: apply_integer_derivative(side, 1, u), call,
            ))
    # order mu + 1 on the alpha = -mu family (the oracle is limited to orders below 2)
    for mu in mus:
        if mu + 1 < 2:
            cases.append(OperatorCase(
                f"left-derivative order {mu:g}+1 on alpha=-{mu:g}", -mu, lam,
                tempered(LEFT, DERIVATIVE, mu + 1),
                lambda f, x, mu=mu: fo.tempered_left_derivative(f, mu + 1, lam, fo.BASE_ZERO, x),
            ))
    return cases


def algebraic_checks(mus, nus, lam, max_mode):
    """Semigroup, inversion and Sturm-Liouville residuals in coefficient space."""
    rng = np.random.default_rng(0)
    out = []
    for nu in nus:
        u = GLFExpansion(GLFParams(-nu, lam), rng.normal(size=max_mode + 1))
        for mu in mus:
            half = apply_tempered(TemperedOperator(LEFT, INTEGRAL, mu / 2, lam), u)
            two = apply_tempered(TemperedOperator(LEFT, INTEGRAL, mu / 2, lam), half)
            one = apply_tempered(TemperedOperator(LEFT, INTEGRAL, mu, lam), u)
            out.append((f"semigroup nu={nu:g} mu={mu:g}", _rel(two.coeffs, one.coeffs), 1e-12))
            back = apply_tempered(TemperedOperator(LEFT, DERIVATIVE, mu, lam), one)
            out.append((f"inversion nu={nu:g} mu={mu:g}", _rel(back.coeffs, u.coeffs), 1e-12))
            if mu < 1 and nu >= mu:
                x = ORACLE_POINTS
                worst = 0.0
                for n in range(max_mode + 1):
                    mode = GLFExpansion.mode(GLFParams(-nu, lam), n)
                    expected = sl_eigenvalue("left-first", mu, nu, lam, n) * mode(x)
                    worst = max(worst, _rel(sl_chain("left-first", mu, mode)(x), expected))
                out.append((f"sturm-liouville nu={nu:g} s={mu:g}", worst, 1e-8))
    return out


def _rel(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / max(np.max(np.abs(b)), 1e-300))


def run_operator_check(cfg):
    lam, max_mode, tol = cfg["lam"], cfg["max_mode"], cfg["tolerance"]
    rows = []
    for case in operator_cases(cfg["mu_list"], cfg["nu_list"], lam):
        err = max(case.compare(n, max_mode) for n in range(max_mode + 1))
        rows.append((case.label, err, tol, "PASS" if err < tol else "FAIL"))
    for label, err, check_tol in algebraic_checks(cfg["mu_list"], cfg["nu_list"], lam, max_mode):
        rows.append((label, err, check_tol, "PASS" if err < check_tol else "FAIL"))
    return ["check", "max_rel_error", "tolerance", "status"], rows


RUNNERS = {
    "model-problem": run_model_problem,
    "half-line": run_half_line,
    "whole-line": run_whole_line,
    "convergence": run_convergence,
    "operator-check": run_operator_check,
}


# ---------------------------------------------------------------- output and entry point


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def run(experiment, raw):
    """Run one experiment from raw string values; returns CSV text."""
    if experiment not in RUNNERS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    cfg = build_config(experiment, raw)
    try:
        header, rows = RUNNERS[experiment](cfg)
    except (DomainError, PreconditionError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, render_csv(header, rows)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="templag", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="flat key = value file")
    args, rest = parser.parse_known_args(argv)
    try:
        raw = read_config_file(args.config) if args.config else {}
        raw.update(parse_overrides(rest))
        cfg, text = run(args.experiment, raw)
    except ConfigError as exc:
        print(f"templag: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"templag: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if cfg["output"] == "-":
        sys.stdout.write(text)
    else:
        with open(cfg["output"], "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
