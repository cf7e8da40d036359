"""
Discrete energies, transition costs and layer-structure certificates.

The discrete energy pairs face gradients p_{i+1/2} = (u_{i+1} - u_i)/h with
trapezoid-weighted potential values:

    E[u] = sum_faces h * D(p) + sum_nodes w_i F(u_i) / eps,

where D is flux.energy_density. Its exact gradient is -W (rhs)/eps for the
semidiscrete right-hand side in solver.semidiscrete_rhs, so the solver
dissipates exactly this quantity.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

import flux as fx
import potentials as pot
from diagnostics import l1_distance_to_pattern
from errors import ConditionError, DomainError, HypothesisNotMet, InvalidArgumentError
from flux import FluxModel
from grid import Field
from potentials import PotentialSpec
from profiles import LayerPattern


@dataclass(frozen=True)
class EnergyReport:
    total: float
    gradient_part: float
    potential_part: float
    per_layer_window: Tuple[Tuple[Tuple[float, float], float], ...] = ()

    def to_dict(self) -> Dict:
        return {
            "total": self.total,
            "gradient_part": self.gradient_part,
            "potential_part": self.potential_part,
            "per_layer_window": [{"interval": list(iv), "energy": e} for iv, e in self.per_layer_window],
        }


def _face_densities(field_: Field, model: FluxModel, eps: float) -> np.ndarray:
    p = field_.face_gradients()
    try:
        return field_.grid.h * fx.energy_density(model, eps, p)
    except DomainError as e:
        bad = np.abs(eps * eps * p) > model.gradient_wall
        cell = int(np.argmax(bad))
        raise DomainError(
            f"Minkowski energy needs eps^2 |u_x| < 1; violated on cell {cell} "
            f"(eps^2 |u_x| = {eps * eps * abs(p[cell]):g})", cell=cell) from e


def energy(field_: Field, potential: PotentialSpec, model: FluxModel, eps: float,
           pattern: Optional[LayerPattern] = None) -> EnergyReport:
    """
    Discrete energy E (Euclidean / linear) or the Minkowski energy.

    With a pattern, the energy is also split over the windows [m_j, m_{j+1}].
    """
    if eps <= 0:
        raise InvalidArgumentError(f"eps must be positive, got {eps}")
    grid = field_.grid
    faces = _face_densities(field_, model, eps)
    nodes = grid.weights * pot.evaluate(potential, field_.values, 0) / eps

    gradient_part = float(np.sum(faces))
    potential_part = float(np.sum(nodes))

    windows = ()
    if pattern is not None and pattern.n_layers:
        m = pattern.midpoints
        face_x = 0.5 * (grid.x[:-1] + grid.x[1:])
        face_win = np.clip(np.searchsorted(m, face_x, side="right") - 1, 0, pattern.n_layers - 1)
        node_win = np.clip(np.searchsorted(m, grid.x, side="right") - 1, 0, pattern.n_layers - 1)
        per = (np.bincount(face_win, faces, minlength=pattern.n_layers)
               + np.bincount(node_win, nodes, minlength=pattern.n_layers))
        windows = tuple(((float(m[j]), float(m[j + 1])), float(per[j]))
                        for j in range(pattern.n_layers))

    return EnergyReport(total=gradient_part + potential_part, gradient_part=gradient_part,
                        potential_part=potential_part, per_layer_window=windows)


def energy_gradient(field_: Field, potential: PotentialSpec, model: FluxModel, eps: float) -> np.ndarray:
    """Exact gradient of the discrete energy with respect to the nodal values."""
    grid = field_.grid
    flux_faces = fx.q(model, eps * eps * field_.face_gradients())
    grad = grid.weights * pot.evaluate(potential, field_.values, 1) / eps
    grad[:-1] -= flux_faces / eps
    grad[1:] += flux_faces / eps
    return grad


def discrete_l2_norm_sq(grid, values: np.ndarray) -> float:
    """Trapezoid-weighted squared L2 norm."""
    values = np.asarray(values, dtype=float)
    return float(np.sum(grid.weights * values * values))


def gradient_l2_norm_sq(field_: Field) -> float:
    """Squared L2 norm of the face gradients (midpoint rule)."""
    p = field_.face_gradients()
    return float(field_.grid.h * np.sum(p * p))


@dataclass(frozen=True)
class TransitionCosts:
    eps: float
    c_eps: float
    gamma_eps: float
    c0: float

    def for_model(self, model: FluxModel) -> float:
        """Single-transition cost matching the flux: c_eps, gamma_eps or c0."""
        if model.kind == fx.EUCLIDEAN:
            return self.c_eps
        if model.kind == fx.MINKOWSKI:
            return self.gamma_eps
        return self.c0

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


def _cost_integral(potential: PotentialSpec, integrand) -> float:
    value, _ = quad(lambda s: integrand(max(pot.evaluate(potential, s, 0), 0.0)),
                    -1.0, 1.0, points=[0.0], limit=200, epsabs=1e-14, epsrel=1e-13)
    return float(value)


def transition_costs(potential: PotentialSpec, eps: float) -> TransitionCosts:
    """
    c_eps = int sqrt(F(2 - eps^2 F)), gamma_eps = int sqrt(F(2 + eps^2 F)),
    c0 = int sqrt(2F), all over [-1, 1].
    """
    if eps <= 0:
        raise InvalidArgumentError(f"eps must be positive, got {eps}")
    e2 = eps * eps
    fmax = pot.potential_max(potential, -1.0, 1.0)
    if 2.0 - e2 * fmax < 0.0:
        raise ConditionError(
            f"c_eps needs 2 - eps^2 F >= 0 on [-1, 1]; max F = {fmax:g}, eps = {eps:g}")

    c_eps = _cost_integral(potential, lambda f: np.sqrt(f * (2.0 - e2 * f)))
    gamma_eps = _cost_integral(potential, lambda f: np.sqrt(f * (2.0 + e2 * f)))
    c0 = _cost_integral(potential, lambda f: np.sqrt(2.0 * f))
    return TransitionCosts(eps=eps, c_eps=c_eps, gamma_eps=gamma_eps, c0=c0)


def young_type_margin(model: FluxModel, eps: float, x, y):
    """
    Left minus right side of the pointwise inequality behind the energy bounds:

        euclidean  D(x) + y/eps >= |x| sqrt(2y - eps^2 y^2),   y in [0, 2 eps^-2]
        minkowski  D(x) + y/eps >= |x| sqrt(2y + eps^2 y^2),   |x| <= eps^-2, y >= 0
        linear     D(x) + y/eps >= |x| sqrt(2y),               y >= 0
    """
    if eps <= 0:
        raise InvalidArgumentError(f"eps must be positive, got {eps}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    e2 = eps * eps
    if np.any(y < 0):
        raise InvalidArgumentError("young_type_margin needs y >= 0")

    z = e2 * x
    if model.kind == fx.EUCLIDEAN:
        if np.any(y > 2.0 / e2):
            raise InvalidArgumentError("euclidean young_type_margin needs y <= 2 eps^-2")
        lhs = eps * x * x / (np.sqrt(1.0 + z * z) + 1.0) + y / eps
        rhs = np.abs(x) * np.sqrt(np.maximum(y * (2.0 - e2 * y), 0.0))
    elif model.kind == fx.MINKOWSKI:
        if np.any(np.abs(x) > 1.0 / e2):
            raise InvalidArgumentError("minkowski young_type_margin needs |x| <= eps^-2")
        lhs = eps * x * x / (1.0 + np.sqrt(np.maximum(1.0 - z * z, 0.0))) + y / eps
        rhs = np.abs(x) * np.sqrt(y * (2.0 + e2 * y))
    else:
        lhs = 0.5 * eps * x * x + y / eps
        rhs = np.abs(x) * np.sqrt(2.0 * y)

    margin = lhs - rhs
    return float(margin) if margin.ndim == 0 else margin


@dataclass(frozen=True)
class Certificate:
    """Measured quantities behind a pass/fail verdict."""

    name: str
    passed: bool
    measurements: Dict = field(default_factory=dict)
    notes: Tuple[str, ...] = ()

    def to_dict(self) -> Dict:
        return {"name": self.name, "passed": self.passed,
                "measurements": dict(self.measurements), "notes": list(self.notes)}


def default_rate(pattern: LayerPattern, potential: PotentialSpec) -> float:
    """A = 0.9 r sqrt(2 lambda)."""
    return 0.9 * pattern.r * np.sqrt(2.0 * max(pot.lambda_min(potential), 0.0))


def default_closeness(pattern: LayerPattern, eps: float) -> float:
    """Closeness radius for the lower-bound hypothesis: N (0.1 r + 2.5 eps)."""
    return max(pattern.n_layers, 1) * (0.1 * pattern.r + 2.5 * eps)


def layer_structure_certificate(field_: Field, pattern: LayerPattern, potential: PotentialSpec,
                                model: FluxModel, eps: float, A: Optional[float] = None,
                                C: float = 1.0) -> Certificate:
    """
    Check an N-transition layer structure: report ||u - v||_L1 and the energy
    excess E[u] - N * cost, and test excess <= C exp(-A/eps).
    """
    rate_cap = pattern.r * np.sqrt(2.0 * max(pot.lambda_min(potential), 0.0))
    A = default_rate(pattern, potential) if A is None else float(A)
    notes = []
    admissible = 0.0 < A < rate_cap
    if not admissible:
        notes.append(f"A = {A:g} outside (0, r sqrt(2 lambda)) = (0, {rate_cap:g})")

    costs = transition_costs(potential, eps)
    cost = costs.for_model(model)
    try:
        report = energy(field_, potential, model, eps)
        total = report.total
    except DomainError as e:
        notes.append(str(e))
        total = float("inf")

    excess = total - pattern.n_layers * cost
    bound = C * np.exp(-A / eps)
    passed = bool(excess <= bound)
    return Certificate(
        name="layer_structure",
        passed=passed,
        measurements={
            "l1_to_pattern": l1_distance_to_pattern(field_, pattern),
            "energy": total,
            "n_layers": pattern.n_layers,
            "transition_cost": cost,
            "energy_excess": excess,
            "allowed_excess": bound,
            "A": A,
            "C": C,
            "A_admissible": admissible,
            "eps": eps,
        },
        notes=tuple(notes),
    )


def lower_bound_check(field_: Field, pattern: LayerPattern, potential: PotentialSpec,
                      model: FluxModel, eps: float, A: Optional[float] = None, C: float = 1.0,
                      delta: Optional[float] = None) -> float:
    """
    Margin E[u] - (N * cost - C exp(-A/eps)); nonnegative when the lower bound holds.

    Raises HypothesisNotMet when ||u - v||_L1 exceeds delta.
    """
    A = default_rate(pattern, potential) if A is None else float(A)
    delta = default_closeness(pattern, eps) if delta is None else float(delta)
    distance = l1_distance_to_pattern(field_, pattern)
    if distance > delta:
        raise HypothesisNotMet(
            f"lower bound needs ||u - v||_L1 <= {delta:g}; measured {distance:g}",
            distance=distance, delta=delta)

    cost = transition_costs(potential, eps).for_model(model)
    total = energy(field_, potential, model, eps).total
    return float(total - (pattern.n_layers * cost - C * np.exp(-A / eps)))
