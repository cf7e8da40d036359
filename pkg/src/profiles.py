"""
Standing-wave profiles and N-transition-layer initial data.

The standing wave u(x) solves eps^2 Q'(eps^2 u') u'' = F'(u) with u(0) = 0 and
u -> +-1 as x -> +-inf. Its first integral P(u') = F(u) gives the slope as a
function of u alone, so the profile is the inverse of

    x(u) = eps * int_0^u ds / g(F(s)),    g = eps * u'   (see flux.profile_slope)

The inverse is tabulated on a lattice clustered toward +-1, interpolated by
a cubic Hermite spline with the exact first-integral slopes, and continued
by exponential tails beyond u = +-(1 - eta).
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline
from scipy.special import roots_legendre

import flux as fx
import potentials as pot
from errors import ConditionError, InvalidArgumentError
from flux import FluxModel
from grid import Field, Grid1D
from potentials import PotentialSpec

DEFAULT_ETA = 1e-6
DEFAULT_KNOTS = 10_001
GAUSS_POINTS = 10
JUMP_RTOL = 1e-12
MAXF_MESSAGE = "max_{Phi in [-1,1]} F(Phi) < eps^-2"


def check_maxF_condition(potential: PotentialSpec, eps: float) -> bool:
    """True iff max_{[-1,1]} F < eps^-2 (needed for smooth Euclidean standing waves)."""
    return pot.potential_max(potential, -1.0, 1.0) < eps ** -2


def _require_profile_conditions(potential: PotentialSpec, model: FluxModel, eps: float) -> None:
    if eps <= 0:
        raise InvalidArgumentError(f"eps must be positive, got {eps}")
    if model.kind == fx.EUCLIDEAN and not check_maxF_condition(potential, eps):
        fmax = pot.potential_max(potential, -1.0, 1.0)
        raise ConditionError(
            f"Euclidean standing wave needs {MAXF_MESSAGE}; max F = {fmax:g}, eps^-2 = {eps ** -2:g}")


def _inverse_slope(potential: PotentialSpec, model: FluxModel, eps: float, s):
    """dx/du divided by eps, i.e. 1/(eps u')."""
    return 1.0 / fx.profile_slope(model, eps, pot.evaluate(potential, s, 0))


def profile_position(potential: PotentialSpec, model: FluxModel, eps: float, u: float) -> float:
    """
    Position x with profile(x) = u, by adaptive quadrature of the first integral.

    Raises ConditionError if the Euclidean smallness condition on F fails and
    InvalidArgumentError for u outside (-1, 1).
    """
    _require_profile_conditions(potential, model, eps)
    if not -1.0 < u < 1.0:
        raise InvalidArgumentError(f"profile value must lie in (-1, 1), got {u}")
    if u == 0.0:
        return 0.0
    value, _ = quad(lambda s: _inverse_slope(potential, model, eps, s), 0.0, u,
                    limit=200, epsabs=1e-13, epsrel=1e-12)
    return eps * value


@dataclass(frozen=True, eq=False)
class ProfileTable:
    """Tabulated standing wave u(x) with analytic exponential tails."""

    eps: float
    model: FluxModel
    potential: PotentialSpec
    x_knots: np.ndarray = field(repr=False)
    u_knots: np.ndarray = field(repr=False)
    eta: float
    decay_rates: Tuple[float, float]  # (left, right), per unit x
    spline: CubicHermiteSpline = field(repr=False, compare=False)

    @property
    def x_matching(self) -> Tuple[float, float]:
        return float(self.x_knots[0]), float(self.x_knots[-1])

    @property
    def n_knots(self) -> int:
        return int(self.x_knots.size)

    def __call__(self, x):
        return sample_profile(self, x)


def _knot_lattice(n_knots: int, eta: float) -> np.ndarray:
    # Clustered toward +-1; an odd count keeps u = 0 on the lattice.
    half = n_knots // 2 + (n_knots % 2 == 0)
    t = np.linspace(0.0, 1.0, half + 1)
    right = (1.0 - eta) * np.sin(0.5 * np.pi * t)
    right[0] = 0.0
    return np.concatenate([-right[:0:-1], right])


def build_profile_table(potential: PotentialSpec, model: FluxModel, eps: float,
                        eta: float = DEFAULT_ETA, n_knots: int = DEFAULT_KNOTS) -> ProfileTable:
    """
    Tabulate the standing wave on u in [-(1 - eta), 1 - eta].

    Knot positions come from composite Gauss-Legendre quadrature of the first
    integral between neighbouring u-knots, accumulated outward from u = 0.
    Tails beyond the last knots decay like exp(-sqrt(F''(+-1)) |x - x_eta| / eps).
    """
    _require_profile_conditions(potential, model, eps)
    if not 0.0 < eta < 0.5:
        raise InvalidArgumentError(f"eta must lie in (0, 0.5), got {eta}")
    if n_knots < 3:
        raise InvalidArgumentError(f"n_knots must be at least 3, got {n_knots}")

    curvature = (pot.evaluate(potential, -1.0, 2), pot.evaluate(potential, 1.0, 2))
    if min(curvature) <= 0.0:
        raise ConditionError(
            f"exponential tails need F''(+-1) > 0; got F''(-1) = {curvature[0]:g}, "
            f"F''(+1) = {curvature[1]:g} (degenerate wells)")

    u = _knot_lattice(n_knots, eta)
    nodes, weights = roots_legendre(GAUSS_POINTS)
    lo, hi = u[:-1], u[1:]
    half = 0.5 * (hi - lo)
    s = (0.5 * (hi + lo))[:, None] + half[:, None] * nodes[None, :]
    pieces = eps * half * (_inverse_slope(potential, model, eps, s) @ weights)

    mid = u.size // 2
    x = np.empty_like(u)
    x[mid] = 0.0
    x[mid + 1:] = np.cumsum(pieces[mid:])
    x[:mid] = -np.cumsum(pieces[:mid][::-1])[::-1]

    slopes = fx.profile_slope(model, eps, pot.evaluate(potential, u, 0)) / eps
    spline = CubicHermiteSpline(x, u, slopes, extrapolate=False)

    for arr in (x, u):
        arr.setflags(write=False)
    rates = (float(np.sqrt(curvature[0]) / eps), float(np.sqrt(curvature[1]) / eps))
    return ProfileTable(eps=eps, model=model, potential=potential, x_knots=x, u_knots=u,
                        eta=eta, decay_rates=rates, spline=spline)


@lru_cache(maxsize=32)
def _cached_table(potential: PotentialSpec, model: FluxModel, eps: float,
                  eta: float, n_knots: int) -> ProfileTable:
    return build_profile_table(potential, model, eps, eta, n_knots)


def cached_profile_table(potential: PotentialSpec, model: FluxModel, eps: float,
                         eta: float = DEFAULT_ETA, n_knots: int = DEFAULT_KNOTS) -> ProfileTable:
    """Profile table memoised per process for the built-in potential families."""
    if potential.is_builtin:
        return _cached_table(potential, model, float(eps), float(eta), int(n_knots))
    return build_profile_table(potential, model, eps, eta, n_knots)


def sample_profile(table: ProfileTable, x):
    """Evaluate the profile: spline between the matching points, analytic tails outside."""
    xs = np.asarray(x, dtype=float)
    flat = np.atleast_1d(xs).astype(float)
    out = np.empty_like(flat)
    x_left, x_right = table.x_matching
    u_left, u_right = float(table.u_knots[0]), float(table.u_knots[-1])
    rate_left, rate_right = table.decay_rates

    core = (flat >= x_left) & (flat <= x_right)
    right = flat > x_right
    left = flat < x_left
    out[core] = table.spline(flat[core])
    out[right] = 1.0 - (1.0 - u_right) * np.exp(-rate_right * (flat[right] - x_right))
    out[left] = -1.0 + (1.0 + u_left) * np.exp(rate_left * (flat[left] - x_left))
    np.clip(out, -1.0, 1.0, out=out)

    if xs.ndim == 0:
        return float(out[0])
    return out.reshape(xs.shape)


def profile_residual(table: ProfileTable, samples_per_knot: int = 2) -> float:
    """
    max |eps^2 Q'(eps^2 u') u'' - F'(u)| over a dense lattice of the tabulated core,
    with u', u'' taken from the interpolant.
    """
    x = table.x_knots
    frac = np.linspace(0.0, 1.0, samples_per_knot + 1)[:-1]
    lattice = (x[:-1, None] + np.diff(x)[:, None] * frac[None, :]).ravel()
    lattice = np.append(lattice, x[-1])

    u = table.spline(lattice)
    du = table.spline(lattice, 1)
    d2u = table.spline(lattice, 2)
    eps2 = table.eps ** 2
    residual = eps2 * fx.q_prime(table.model, eps2 * du) * d2u - pot.evaluate(table.potential, u, 1)
    return float(np.max(np.abs(residual)))


@dataclass(frozen=True)
class LayerPattern:
    """
    Step function v = +-1 on [a, b] with jumps at h_1 < ... < h_N.

    first_sign is the value of v on [a, h_1); r is the separation radius.
    """

    a: float
    b: float
    jumps: Tuple[float, ...]
    first_sign: int = -1
    r: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "jumps", tuple(float(h) for h in self.jumps))
        problems = pattern_problems(self.a, self.b, self.jumps, self.first_sign, self.r)
        if problems:
            raise InvalidArgumentError("invalid layer pattern: " + "; ".join(problems))

    @property
    def n_layers(self) -> int:
        return len(self.jumps)

    @property
    def midpoints(self) -> np.ndarray:
        """m_1 = a, m_j = (h_{j-1} + h_j)/2, m_{N+1} = b."""
        h = np.asarray(self.jumps)
        return np.concatenate([[self.a], 0.5 * (h[:-1] + h[1:]), [self.b]])

    @property
    def jump_tol(self) -> float:
        """Points this close to a jump count as sitting on it."""
        return JUMP_RTOL * (self.b - self.a)

    def on_jump(self, x) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        h = np.asarray(self.jumps)
        if not h.size:
            return np.zeros(xs.shape, dtype=bool)
        return (np.abs(xs[..., None] - h) <= self.jump_tol).any(axis=-1)

    def v(self, x):
        """Exact step function; jump points take the value 0."""
        xs = np.asarray(x, dtype=float)
        h = np.asarray(self.jumps)
        crossed = np.searchsorted(h, xs, side="right")
        values = self.first_sign * np.where(crossed % 2 == 0, 1.0, -1.0)
        if h.size:
            values = np.where(self.on_jump(xs).reshape(xs.shape), 0.0, values)
        return float(values) if xs.ndim == 0 else values

    def to_dict(self):
        return {"a": self.a, "b": self.b, "jumps": list(self.jumps),
                "first_sign": self.first_sign, "r": self.r}


def pattern_problems(a: float, b: float, jumps: Sequence[float], first_sign: int, r: float):
    problems = []
    h = np.asarray(jumps, dtype=float)
    if not a < b:
        problems.append(f"need a < b, got [{a}, {b}]")
    if first_sign not in (-1, 1):
        problems.append(f"first_sign must be -1 or +1, got {first_sign}")
    if r < 0:
        problems.append(f"separation radius must be nonnegative, got {r}")
    if h.size:
        if np.any(np.diff(h) <= 0):
            problems.append("jumps must be strictly increasing")
        if h[0] <= a or h[-1] >= b:
            problems.append(f"jumps must lie inside ({a}, {b})")
        tol = 1e-12 * max(1.0, b - a)
        if np.any(np.diff(h) < 2.0 * r - tol):
            problems.append(f"intervals (h_i - r, h_i + r) overlap for r = {r}")
        if h[0] - r < a - tol or h[-1] + r > b + tol:
            problems.append(f"need a <= h_1 - r and h_N + r <= b for r = {r}")
    return problems


def infer_radius(a: float, b: float, jumps: Sequence[float]) -> float:
    """Half the minimal jump separation, capped by the distances to the boundary."""
    h = np.asarray(jumps, dtype=float)
    if h.size == 0:
        return 0.5 * (b - a)
    candidates = [h[0] - a, b - h[-1]]
    if h.size > 1:
        candidates.append(0.5 * float(np.min(np.diff(h))))
    return float(min(candidates))


def make_pattern(a: float, b: float, jumps: Sequence[float], first_sign: int = -1,
                 r: Optional[float] = None) -> LayerPattern:
    """LayerPattern with r inferred when not given."""
    jumps = tuple(sorted(float(h) for h in jumps))
    radius = infer_radius(a, b, jumps) if r is None else float(r)
    return LayerPattern(a=float(a), b=float(b), jumps=jumps, first_sign=int(first_sign), r=radius)


def sample_pattern(pattern: LayerPattern, grid: Grid1D) -> Field:
    """Nodal samples of v itself (a one-cell jump at each h_j)."""
    return Field(grid, pattern.v(grid.x), 0.0)


def build_layer_datum(pattern: LayerPattern, table: ProfileTable, grid: Grid1D) -> Field:
    """
    Glue copies of the standing wave into an N-transition-layer datum.

    On [m_j, m_{j+1}] the datum is profile(s_j (x - h_j)) with alternating
    orientations s_j, so u(h_j) = 0 and u has the sign of v near a.
    """
    if not (np.isclose(grid.a, pattern.a) and np.isclose(grid.b, pattern.b)):
        raise InvalidArgumentError(
            f"grid [{grid.a}, {grid.b}] does not match pattern domain [{pattern.a}, {pattern.b}]")
    x = grid.x
    if pattern.n_layers == 0:
        return Field(grid, np.full(x.size, float(pattern.first_sign)), 0.0)

    m = pattern.midpoints
    window = np.clip(np.searchsorted(m, x, side="right") - 1, 0, pattern.n_layers - 1)
    h = np.asarray(pattern.jumps)[window]
    orientation = -pattern.first_sign * np.where(window % 2 == 0, 1.0, -1.0)
    values = sample_profile(table, orientation * (x - h))
    values = np.where(pattern.on_jump(x), 0.0, values)
    return Field(grid, values, 0.0)
