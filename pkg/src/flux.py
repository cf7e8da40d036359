"""
Diffusion flux models Q for u_t = Q(eps^2 u_x)_x - F'(u).

    euclidean   Q(s) = s / sqrt(1 + s^2)    (saturating, |Q| < 1)
    minkowski   Q(s) = s / sqrt(1 - s^2)    (singular at |s| = 1)
    linear      Q(s) = s                    (classical Allen-Cahn)

All functions accept scalars or numpy arrays. Closed forms are written
in cancellation-free form so that small eps^2 s stays accurate.
"""

from dataclasses import dataclass
from typing import Dict, Union

import numpy as np

from errors import DomainError, InvalidArgumentError

ArrayLike = Union[float, np.ndarray]

EUCLIDEAN = "euclidean"
MINKOWSKI = "minkowski"
LINEAR = "linear"
KINDS = (EUCLIDEAN, MINKOWSKI, LINEAR)

DEFAULT_DELTA_GRAD = 1e-6


@dataclass(frozen=True)
class FluxModel:
    kind: str
    delta_grad: float = DEFAULT_DELTA_GRAD

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown flux model '{self.kind}'; use one of {KINDS}")
        if not 0.0 < self.delta_grad < 1.0:
            raise InvalidArgumentError(f"delta_grad must lie in (0, 1), got {self.delta_grad}")

    @property
    def is_minkowski(self) -> bool:
        return self.kind == MINKOWSKI

    @property
    def gradient_wall(self) -> float:
        """Largest admissible |s| for the Minkowski flux."""
        return 1.0 - self.delta_grad

    def to_dict(self) -> Dict:
        return {"name": self.kind, "delta_grad": self.delta_grad}


def _out(values: np.ndarray) -> ArrayLike:
    return float(values) if np.ndim(values) == 0 else values


def check_gradient_bound(model: FluxModel, s: ArrayLike, what: str = "eps^2 |u_x|") -> None:
    """Raise DomainError if a Minkowski argument reaches the gradient wall."""
    if not model.is_minkowski:
        return
    a = np.abs(np.asarray(s, dtype=float))
    bad = ~(a <= model.gradient_wall)
    if np.any(bad):
        cell = int(np.argmax(bad)) if a.ndim else None
        worst = float(np.max(a)) if a.size else float("nan")
        raise DomainError(
            f"Minkowski flux needs {what} < 1 (wall at 1 - delta_grad = {model.gradient_wall:g}); "
            f"got {worst:g}" + (f" at cell {cell}" if cell is not None else ""),
            cell=cell)


def q(model: FluxModel, s: ArrayLike) -> ArrayLike:
    """Flux value Q(s); odd in s."""
    s = np.asarray(s, dtype=float)
    if model.kind == EUCLIDEAN:
        return _out(s / np.sqrt(1.0 + s * s))
    if model.kind == MINKOWSKI:
        check_gradient_bound(model, s, "|s|")
        return _out(s / np.sqrt(1.0 - s * s))
    return _out(s.copy() if s.ndim else s)


def q_prime(model: FluxModel, s: ArrayLike) -> ArrayLike:
    """Q'(s) = (1 +- s^2)^(-3/2); even in s."""
    s = np.asarray(s, dtype=float)
    if model.kind == EUCLIDEAN:
        return _out((1.0 + s * s) ** -1.5)
    if model.kind == MINKOWSKI:
        check_gradient_bound(model, s, "|s|")
        return _out((1.0 - s * s) ** -1.5)
    return _out(np.ones_like(s))


def energy_density(model: FluxModel, eps: float, p: ArrayLike) -> ArrayLike:
    """
    Gradient part of the energy integrand for u_x = p.

    Euclidean (sqrt(1 + eps^4 p^2) - 1)/eps^3, Minkowski (1 - sqrt(1 - eps^4 p^2))/eps^3,
    linear eps p^2 / 2. Its derivative in p is Q(eps^2 p)/eps.
    """
    if eps <= 0:
        raise InvalidArgumentError(f"eps must be positive, got {eps}")
    p = np.asarray(p, dtype=float)
    z = eps * eps * p
    if model.kind == EUCLIDEAN:
        return _out(eps * p * p / (np.sqrt(1.0 + z * z) + 1.0))
    if model.kind == MINKOWSKI:
        check_gradient_bound(model, z)
        return _out(eps * p * p / (1.0 + np.sqrt(1.0 - z * z)))
    return _out(0.5 * eps * p * p)


def p_eps(model: FluxModel, eps: float, s: ArrayLike) -> ArrayLike:
    """
    First-integral kinetic term P(s) = int_0^s eps^2 w Q'(eps^2 w) dw.

    Along a standing wave P(u') = F(u).
    """
    if eps <= 0:
        raise InvalidArgumentError(f"eps must be positive, got {eps}")
    s = np.asarray(s, dtype=float)
    z = eps * eps * s
    if model.kind == EUCLIDEAN:
        root = np.sqrt(1.0 + z * z)
        return _out(z * z / (eps * eps * root * (root + 1.0)))
    if model.kind == MINKOWSKI:
        check_gradient_bound(model, z)
        root = np.sqrt(1.0 - z * z)
        return _out(z * z / (eps * eps * root * (1.0 + root)))
    return _out(0.5 * z * s)


def profile_slope(model: FluxModel, eps: float, f_values: ArrayLike) -> ArrayLike:
    """
    eps * u' of the standing wave as a function of F(u), from P(u') = F(u).

    Euclidean sqrt(F(2 - eps^2 F))/(1 - eps^2 F), Minkowski
    sqrt(F(2 + eps^2 F))/(1 + eps^2 F), linear sqrt(2F).
    """
    f = np.maximum(np.asarray(f_values, dtype=float), 0.0)
    a = eps * eps * f
    if model.kind == EUCLIDEAN:
        return _out(np.sqrt(f * (2.0 - a)) / (1.0 - a))
    if model.kind == MINKOWSKI:
        return _out(np.sqrt(f * (2.0 + a)) / (1.0 + a))
    return _out(np.sqrt(2.0 * f))


def parse_flux(config: Union[str, Dict]) -> FluxModel:
    """Build a flux model from "euclidean" | "minkowski" | "linear" (or a dict with name/delta_grad)."""
    if isinstance(config, dict):
        return FluxModel(str(config.get("name", "")).strip().lower(),
                         float(config.get("delta_grad", DEFAULT_DELTA_GRAD)))
    return FluxModel(str(config).strip().lower())
