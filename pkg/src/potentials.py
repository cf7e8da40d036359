"""
Double-well potentials F and their derivatives up to third order.

Built-in families:
    quartic        F(u) = (u^2 - 1)^2 / 4
    degenerate:n=K F(u) = (u^2 - 1)^(2K) / (4K)     (K = 1 is the quartic)
    custom         four user expressions F, F', F'', F'''

All evaluators accept scalars or numpy arrays.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar

from errors import InvalidArgumentError

ArrayLike = Union[float, np.ndarray]

QUARTIC = "quartic"
DEGENERATE = "degenerate"
CUSTOM = "custom"

# Validation lattice and well exclusion radius
DEFAULT_LATTICE = np.linspace(-1.5, 1.5, 2001)
WELL_EXCLUSION = 1e-6


@dataclass(frozen=True)
class PotentialSpec:
    """A double-well potential with wells at -1 and +1."""

    family: str
    n: int = 1
    derivatives: Optional[Tuple[Callable, Callable, Callable, Callable]] = field(
        default=None, compare=False, repr=False)
    expressions: Optional[Tuple[str, str, str, str]] = None

    @property
    def name(self) -> str:
        if self.family == DEGENERATE:
            return f"degenerate:n={self.n}"
        return self.family

    @property
    def is_builtin(self) -> bool:
        return self.family in (QUARTIC, DEGENERATE)

    def F(self, u: ArrayLike) -> ArrayLike:
        return evaluate(self, u, 0)

    def dF(self, u: ArrayLike) -> ArrayLike:
        return evaluate(self, u, 1)

    def d2F(self, u: ArrayLike) -> ArrayLike:
        return evaluate(self, u, 2)

    def d3F(self, u: ArrayLike) -> ArrayLike:
        return evaluate(self, u, 3)

    def to_dict(self) -> Dict:
        if self.family == CUSTOM:
            keys = ("F", "dF", "d2F", "d3F")
            exprs = self.expressions or ("<callable>",) * 4
            return {"name": CUSTOM, **dict(zip(keys, exprs))}
        return {"name": self.name}


def quartic() -> PotentialSpec:
    return PotentialSpec(QUARTIC, n=1)


def degenerate(n: int) -> PotentialSpec:
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"degenerate potential needs integer n >= 1, got {n}")
    return PotentialSpec(DEGENERATE, n=int(n))


def custom(F: Callable, dF: Callable, d2F: Callable, d3F: Callable,
           expressions: Optional[Tuple[str, str, str, str]] = None) -> PotentialSpec:
    """Custom potential. All four derivatives must be supplied explicitly."""
    return PotentialSpec(CUSTOM, n=0, derivatives=(F, dF, d2F, d3F),
                         expressions=expressions)


def _power_family(u: ArrayLike, n: int, order: int) -> ArrayLike:
    # F = w^(2n)/(4n) with w = u^2 - 1
    u = np.asarray(u, dtype=float)
    w = u * u - 1.0
    m = 2 * n
    if order == 0:
        return w ** m / (2.0 * m)
    if order == 1:
        return u * w ** (m - 1)
    if order == 2:
        return w ** (m - 1) + 2.0 * (m - 1) * u * u * w ** (m - 2)
    out = 6.0 * (m - 1) * u * w ** (m - 2)
    if m > 2:
        out = out + 4.0 * (m - 1) * (m - 2) * u ** 3 * w ** (m - 3)
    return out


def evaluate(spec: PotentialSpec, u: ArrayLike, order: int = 0) -> ArrayLike:
    """
    Evaluate F or one of its derivatives.

    Args:
        spec: potential
        u: point(s)
        order: 0..3 for F, F', F'', F'''

    Returns:
        Value(s) with the shape of u (a float for scalar input)
    """
    if order not in (0, 1, 2, 3):
        raise InvalidArgumentError(f"unsupported derivative order {order}; use 0, 1, 2 or 3")

    if spec.family in (QUARTIC, DEGENERATE):
        out = _power_family(u, spec.n, order)
    elif spec.family == CUSTOM:
        if spec.derivatives is None:
            raise InvalidArgumentError("custom potential has no derivative functions")
        out = np.asarray(spec.derivatives[order](np.asarray(u, dtype=float)), dtype=float)
        out = np.broadcast_to(out, np.shape(u)).copy() if np.ndim(u) else out
    else:
        raise InvalidArgumentError(f"unknown potential family '{spec.family}'")

    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    residual: float
    severity: str = "error"  # "error" or "warning"


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking the standing double-well assumptions."""

    potential: str
    conditions: Tuple[ConditionCheck, ...]
    lambda_min: float
    notes: Tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions if c.severity == "error")

    @property
    def warnings(self) -> List[str]:
        return [c.name for c in self.conditions if c.severity == "warning" and not c.passed]

    @property
    def failures(self) -> List[str]:
        return [c.name for c in self.conditions if c.severity == "error" and not c.passed]

    @property
    def degenerate_wells(self) -> bool:
        return any(c.name.startswith("F''") and not c.passed for c in self.conditions)

    def to_dict(self) -> Dict:
        return {
            "potential": self.potential,
            "passed": self.passed,
            "lambda_min": self.lambda_min,
            "conditions": [c.__dict__ for c in self.conditions],
            "warnings": self.warnings,
            "notes": list(self.notes),
        }


def validate_double_well(spec: PotentialSpec, tol: float = 1e-10,
                         lattice: Optional[Sequence[float]] = None) -> ValidationReport:
    """
    Check F(+-1) = F'(+-1) = 0, F''(+-1) > 0 and F > 0 away from the wells.

    Degenerate wells (F''(+-1) <= tol) are reported as warnings, not failures.
    Nothing is raised; every finding goes into the report.
    """
    if tol <= 0:
        raise InvalidArgumentError("validation tolerance must be positive")
    grid = DEFAULT_LATTICE if lattice is None else np.asarray(lattice, dtype=float)

    checks = []
    for well in (-1.0, 1.0):
        value = abs(evaluate(spec, well, 0))
        checks.append(ConditionCheck(f"F({well:+.0f})=0", value <= tol, value))
    for well in (-1.0, 1.0):
        value = abs(evaluate(spec, well, 1))
        checks.append(ConditionCheck(f"F'({well:+.0f})=0", value <= tol, value))
    for well in (-1.0, 1.0):
        value = evaluate(spec, well, 2)
        checks.append(ConditionCheck(f"F''({well:+.0f})>0", value > tol, value, severity="warning"))

    away = (np.abs(grid - 1.0) >= WELL_EXCLUSION) & (np.abs(grid + 1.0) >= WELL_EXCLUSION)
    values = np.asarray(evaluate(spec, grid[away], 0))
    min_value = float(values.min()) if values.size else float("nan")
    checks.append(ConditionCheck("F(u)>0 for u!=+-1", bool(values.size) and min_value > 0.0,
                                 min_value))

    notes = []
    if spec.family == CUSTOM:
        notes.append(f"custom potential checked on [{grid.min():g}, {grid.max():g}] only; "
                     "global C^3 regularity is not verified")

    return ValidationReport(potential=spec.name, conditions=tuple(checks),
                            lambda_min=lambda_min(spec), notes=tuple(notes))


def lambda_min(spec: PotentialSpec) -> float:
    """lambda = min{F''(-1), F''(+1)}."""
    return float(min(evaluate(spec, -1.0, 2), evaluate(spec, 1.0, 2)))


def _sampled_max(func: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                 samples: int = 4001) -> float:
    """Max of func on [lo, hi]: dense sampling, then bounded refinement around the best sample."""
    if hi <= lo:
        return float(func(np.array([lo]))[0])
    xs = np.linspace(lo, hi, samples)
    ys = func(xs)
    k = int(np.argmax(ys))
    best = float(ys[k])
    left, right = xs[max(k - 1, 0)], xs[min(k + 1, samples - 1)]
    if right > left:
        res = minimize_scalar(lambda s: -float(func(np.array([s]))[0]),
                              bounds=(left, right), method="bounded",
                              options={"xatol": 1e-12})
        if res.success:
            best = max(best, -float(res.fun))
    return best


def sup_third_derivative(spec: PotentialSpec, rho1: float) -> float:
    """nu = sup |F'''| on [-1 - rho1, 1 + rho1]."""
    if rho1 < 0:
        raise InvalidArgumentError(f"rho1 must be nonnegative, got {rho1}")
    return _sampled_max(lambda s: np.abs(evaluate(spec, s, 3)), -1.0 - rho1, 1.0 + rho1)


def potential_max(spec: PotentialSpec, lo: float = -1.0, hi: float = 1.0) -> float:
    """max F on [lo, hi]."""
    return _sampled_max(lambda s: np.asarray(evaluate(spec, s, 0)), lo, hi)


def parse_potential(config: Union[str, Dict]) -> PotentialSpec:
    """
    Build a potential from its config form.

    Accepts "quartic", "degenerate:n=2", or a dict
    {"name": "custom", "F": ..., "dF": ..., "d2F": ..., "d3F": ...}
    with expressions in the variable u.
    """
    if isinstance(config, dict):
        name = str(config.get("name", "")).strip().lower()
        if name != CUSTOM:
            return parse_potential(name)
        from expressions import compile_expression

        keys = ("F", "dF", "d2F", "d3F")
        missing = [k for k in keys if k not in config]
        if missing:
            raise InvalidArgumentError(
                f"custom potential must supply all four derivatives; missing {missing}")
        exprs = tuple(str(config[k]) for k in keys)
        funcs = tuple(compile_expression(e, variable="u") for e in exprs)
        return custom(*funcs, expressions=exprs)

    text = str(config).strip().lower()
    if text == QUARTIC:
        return quartic()
    if text.startswith(DEGENERATE):
        _, _, param = text.partition(":")
        key, _, value = param.partition("=")
        if key.strip() != "n" or not value.strip():
            raise InvalidArgumentError(f"expected 'degenerate:n=<int>', got '{config}'")
        try:
            n = int(value)
        except ValueError:
            raise InvalidArgumentError(f"degeneracy n must be an integer, got '{value}'")
        return degenerate(n)
    raise InvalidArgumentError(f"unknown potential '{config}'; use quartic, degenerate:n=K or custom")
