"""
Implicit evolution of u_t = Q(eps^2 u_x)_x - F'(u) with zero-flux boundaries.

Space: nodal values on a uniform grid, fluxes on faces, trapezoid weights at
the nodes, so rhs = -eps W^-1 grad E for the discrete energy of `energy`.
Time: implicit Euler, full Newton on the tridiagonal Jacobian, step doubling
for the local error and geometric dt growth on quiet stretches.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve_banded
from tqdm import tqdm

import flux as fx
import potentials as pot
from diagnostics import interface, l1_distance_to_pattern
from energy import EnergyReport, discrete_l2_norm_sq, energy, gradient_l2_norm_sq
from errors import ConstraintError, DomainError, InvalidArgumentError, SolverAbort, StepRejected
from flux import FluxModel
from grid import Field, Grid1D
from potentials import PotentialSpec
from profiles import LayerPattern

DT_MAX_DEFAULT = {fx.EUCLIDEAN: 10.0, fx.LINEAR: 10.0, fx.MINKOWSKI: 1.0}


@dataclass(frozen=True)
class SolverConfig:
    eps: float
    model: FluxModel
    potential: PotentialSpec
    t_end: float
    dt_init: float = 1e-4
    dt_min: float = 1e-10
    dt_max: Optional[float] = None
    newton_tol: float = 1e-10
    newton_max_iter: int = 12
    local_error_tol: float = 1e-3
    snapshot_times: Tuple[float, ...] = ()
    observer_stride: int = 50
    tol_diss: float = 10.0
    energy_tol: float = 1e-10
    grow_after: int = 5
    grow_factor: float = 1.3
    max_damping: int = 8

    def __post_init__(self):
        if self.dt_max is None:
            object.__setattr__(self, "dt_max", DT_MAX_DEFAULT[self.model.kind])
        object.__setattr__(self, "snapshot_times", tuple(sorted(float(t) for t in self.snapshot_times)))
        problems = config_problems(self)
        if problems:
            raise InvalidArgumentError("invalid solver config: " + "; ".join(problems))

    def to_dict(self) -> Dict:
        return {
            "eps": self.eps, "model": self.model.to_dict(), "potential": self.potential.to_dict(),
            "t_end": self.t_end, "dt_init": self.dt_init, "dt_min": self.dt_min, "dt_max": self.dt_max,
            "newton_tol": self.newton_tol, "newton_max_iter": self.newton_max_iter,
            "local_error_tol": self.local_error_tol, "snapshot_times": list(self.snapshot_times),
            "observer_stride": self.observer_stride, "tol_diss": self.tol_diss,
            "energy_tol": self.energy_tol, "grow_after": self.grow_after,
            "grow_factor": self.grow_factor, "max_damping": self.max_damping,
        }


def config_problems(config: SolverConfig) -> List[str]:
    problems = []
    if not config.eps > 0:
        problems.append(f"eps must be positive, got {config.eps}")
    if not 0 < config.dt_min <= config.dt_init <= config.dt_max:
        problems.append(f"need 0 < dt_min <= dt_init <= dt_max, got "
                        f"{config.dt_min}, {config.dt_init}, {config.dt_max}")
    for name in ("newton_tol", "local_error_tol", "tol_diss", "energy_tol"):
        if not getattr(config, name) > 0:
            problems.append(f"{name} must be positive, got {getattr(config, name)}")
    if config.newton_max_iter < 1:
        problems.append(f"newton_max_iter must be at least 1, got {config.newton_max_iter}")
    if config.observer_stride < 1:
        problems.append(f"observer_stride must be at least 1, got {config.observer_stride}")
    if config.grow_factor <= 1.0 or config.grow_after < 1:
        problems.append("dt growth needs grow_factor > 1 and grow_after >= 1")
    if any(t < 0 or t > config.t_end for t in config.snapshot_times):
        problems.append(f"snapshot times must lie in [0, t_end = {config.t_end}]")
    return problems


@dataclass(frozen=True)
class StepStats:
    iterations: int
    residual: float
    dt: float


@dataclass(frozen=True)
class SeriesRow:
    """One observation of a run."""

    t: float
    dt: float
    energy: float
    energy_gradient_part: float
    energy_potential_part: float
    ut_norm_sq: float
    dissipation_residual: float
    l1_to_v: float
    interfaces: Tuple[float, ...]

    @property
    def n_layers(self) -> int:
        return len(self.interfaces)


@dataclass
class RunRecord:
    """Everything one evolution produced; filled in by evolve."""

    config: SolverConfig
    initial: Field
    pattern: Optional[LayerPattern] = None
    series: List[SeriesRow] = field(default_factory=list)
    snapshots: Dict[float, Field] = field(default_factory=dict)
    checkpoints: Dict[float, Field] = field(default_factory=dict)
    final: Optional[Field] = None
    status: str = "running"
    n_accepted: int = 0
    n_rejected: int = 0
    newton_iterations: int = 0
    max_energy_increase: float = -float("inf")
    max_dissipation_ratio: float = 0.0

    @property
    def energy_monotone(self) -> bool:
        """Every accepted step kept E below E_prev + energy_tol (1 + |E_prev|)."""
        return self.max_energy_increase <= self.config.energy_tol

    @property
    def dissipation_ok(self) -> bool:
        return self.max_dissipation_ratio <= self.config.tol_diss

    def layers_at(self, t: float) -> int:
        """Layer count of the last observation at or before t."""
        count = self.series[0].n_layers
        for row in self.series:
            if row.t > t:
                break
            count = row.n_layers
        return count

    def summary(self) -> Dict:
        return {
            "status": self.status,
            "t_final": self.final.time_stamp if self.final is not None else None,
            "accepted_steps": self.n_accepted,
            "rejected_steps": self.n_rejected,
            "newton_iterations": self.newton_iterations,
            "max_relative_energy_increase": self.max_energy_increase if self.n_accepted else None,
            "energy_monotone": self.energy_monotone,
            "max_dissipation_ratio": self.max_dissipation_ratio,
            "dissipation_within_tolerance": self.dissipation_ok,
        }


def _face_flux(values: np.ndarray, h: float, config: SolverConfig, derivative: bool = False):
    eps2 = config.eps * config.eps
    s = eps2 * np.diff(values) / h
    try:
        flux_values = fx.q(config.model, s)
        slopes = eps2 * fx.q_prime(config.model, s) / h if derivative else None
    except DomainError as e:
        cell = int(np.argmax(np.abs(s)))
        raise ConstraintError(
            f"eps^2 |u_x| = {abs(s[cell]):g} reaches the gradient wall "
            f"{config.model.gradient_wall:g} on cell {cell}", cell=cell) from e
    return np.atleast_1d(flux_values), slopes


def _rhs(values: np.ndarray, grid: Grid1D, config: SolverConfig, flux_values: np.ndarray) -> np.ndarray:
    div = np.zeros_like(values)
    div[:-1] += flux_values
    div[1:] -= flux_values
    return div / grid.weights - pot.evaluate(config.potential, values, 1)


def semidiscrete_rhs(field_: Field, config: SolverConfig) -> np.ndarray:
    """
    Nodal u_t: (Q_{i+1/2} - Q_{i-1/2})/w_i - F'(u_i) with Q = Q(eps^2 face gradient)
    and zero flux through the two outer faces.

    Raises ConstraintError (with the cell index) at the Minkowski gradient wall.
    """
    flux_values, _ = _face_flux(field_.values, field_.grid.h, config)
    return _rhs(field_.values, field_.grid, config, flux_values)


def _violates_wall(values: np.ndarray, h: float, config: SolverConfig) -> bool:
    if not config.model.is_minkowski:
        return False
    s = config.eps * config.eps * np.abs(np.diff(values)) / h
    return bool(np.any(~(s <= config.model.gradient_wall)))


def _implicit_euler(values: np.ndarray, dt: float, grid: Grid1D,
                    config: SolverConfig) -> Tuple[np.ndarray, int, float]:
    """Newton solve of u - u_old - dt rhs(u) = 0 starting from u_old."""
    w = grid.weights
    u = values.copy()
    for iteration in range(1, config.newton_max_iter + 1):
        try:
            flux_values, k = _face_flux(u, grid.h, config, derivative=True)
        except ConstraintError as e:
            raise StepRejected(str(e), reason="constraint") from e
        residual = u - values - dt * _rhs(u, grid, config, flux_values)

        diag = 1.0 + dt * pot.evaluate(config.potential, u, 2)
        diag[:-1] += dt * k / w[:-1]
        diag[1:] += dt * k / w[1:]
        banded = np.zeros((3, u.size))
        banded[0, 1:] = -dt * k / w[:-1]
        banded[1] = diag
        banded[2, :-1] = -dt * k / w[1:]
        try:
            delta = solve_banded((1, 1), banded, -residual, check_finite=False)
        except (LinAlgError, ValueError) as e:
            raise StepRejected(f"Newton linear solve failed: {e}") from e
        if not np.all(np.isfinite(delta)):
            raise StepRejected("Newton update is not finite")

        scale = 1.0
        candidate = u + delta
        halvings = 0
        while _violates_wall(candidate, grid.h, config):
            if halvings == config.max_damping:
                raise StepRejected("Newton iterate stays beyond the gradient wall", reason="constraint")
            scale *= 0.5
            halvings += 1
            candidate = u + scale * delta
        u = candidate

        update = float(np.max(np.abs(scale * delta)))
        if update <= config.newton_tol and scale == 1.0:
            return u, iteration, update
    raise StepRejected(f"Newton did not converge in {config.newton_max_iter} iterations "
                       f"(last update {update:g})")


def step(field_: Field, dt: float, config: SolverConfig) -> Tuple[Field, StepStats]:
    """One implicit Euler step; raises StepRejected and leaves field_ untouched on failure."""
    if not config.dt_min <= dt <= config.dt_max:
        raise InvalidArgumentError(f"dt must lie in [{config.dt_min}, {config.dt_max}], got {dt}")
    if _violates_wall(field_.values, field_.grid.h, config):
        raise StepRejected("starting state violates the gradient wall", reason="constraint")
    values, iterations, residual = _implicit_euler(field_.values, dt, field_.grid, config)
    return field_.with_values(values, field_.time_stamp + dt), StepStats(iterations, residual, dt)


def _observe(state: Field, report: EnergyReport, dt: float, ut_norm_sq: float,
             residual: float, pattern: Optional[LayerPattern]) -> SeriesRow:
    l1 = l1_distance_to_pattern(state, pattern) if pattern is not None else float("nan")
    return SeriesRow(
        t=state.time_stamp, dt=dt, energy=report.total,
        energy_gradient_part=report.gradient_part, energy_potential_part=report.potential_part,
        ut_norm_sq=ut_norm_sq, dissipation_residual=residual, l1_to_v=l1,
        interfaces=interface(state).positions,
    )


Observer = Callable[[Field, SeriesRow], None]


def evolve(u0: Field, config: SolverConfig, observers: Sequence[Observer] = (),
           pattern: Optional[LayerPattern] = None, progress: bool = False) -> RunRecord:
    """
    Integrate from u0.time_stamp to config.t_end.

    A step of size dt is accepted when one full step and two half steps agree
    to local_error_tol in max norm and neither half step raises the energy;
    the two-half-step state is kept. dt halves on rejection and grows by
    grow_factor after grow_after consecutive accepts. Steps are clipped to land
    on snapshot times and on t_end. Observations happen every observer_stride
    accepted steps, at snapshot times and at the end.

    Raises SolverAbort (carrying the last accepted state and the partial
    record) when dt would drop below dt_min.
    """
    grid = u0.grid
    eps = config.eps
    semidiscrete_rhs(u0, config)

    record = RunRecord(config=config, initial=u0, pattern=pattern)
    pending = [t for t in config.snapshot_times if t >= u0.time_stamp]
    state = u0
    report = energy(state, config.potential, config.model, eps)
    row = _observe(state, report, 0.0, 0.0, 0.0, pattern)
    record.series.append(row)
    record.checkpoints[state.time_stamp] = state
    last_observed = (state, row)
    for observer in observers:
        observer(state, row)
    while pending and pending[0] <= state.time_stamp:
        record.snapshots[pending.pop(0)] = state

    dt = config.dt_init
    streak = 0
    landing_tol = 1e-12 * max(1.0, abs(config.t_end))
    bar = tqdm(total=float(config.t_end - u0.time_stamp), disable=not progress,
               unit="t", desc="evolve", leave=False)
    try:
        while config.t_end - state.time_stamp > landing_tol:
            t = state.time_stamp
            target = min(config.t_end, pending[0]) if pending else config.t_end
            dt_try = min(dt, config.dt_max, target - t)
            lands = dt_try >= target - t

            try:
                full, it_full, _ = _implicit_euler(state.values, dt_try, grid, config)
                half, it_a, _ = _implicit_euler(state.values, 0.5 * dt_try, grid, config)
                both, it_b, _ = _implicit_euler(half, 0.5 * dt_try, grid, config)
                error = float(np.max(np.abs(both - full)))
                accepted = error <= config.local_error_tol
                if accepted:
                    mid = state.with_values(half, t + 0.5 * dt_try)
                    report_mid = energy(mid, config.potential, config.model, eps)
                    new_state = state.with_values(both, target if lands else t + dt_try)
                    report_new = energy(new_state, config.potential, config.model, eps)
                    rise = max((report_mid.total - report.total) / (1.0 + abs(report.total)),
                               (report_new.total - report_mid.total) / (1.0 + abs(report_mid.total)))
                    accepted = rise <= config.energy_tol
                record.newton_iterations += it_full + it_a + it_b
            except (StepRejected, DomainError):
                accepted = False

            if not accepted:
                record.n_rejected += 1
                streak = 0
                dt = 0.5 * dt_try
                if dt < config.dt_min:
                    record.status = "aborted"
                    record.final = state
                    raise SolverAbort(
                        f"time step fell below dt_min = {config.dt_min:g} at t = {t:g}",
                        snapshot=state, record=record)
                continue

            # dissipation identity over the two half steps
            h_dt = 0.5 * dt_try
            ut_a = (half - state.values) / h_dt
            ut_b = (both - half) / h_dt
            diss = (report_new.total - report.total
                    + h_dt * (discrete_l2_norm_sq(grid, ut_a) + discrete_l2_norm_sq(grid, ut_b)) / eps)
            record.max_dissipation_ratio = max(record.max_dissipation_ratio, abs(diss) / dt_try ** 2)
            record.max_energy_increase = max(record.max_energy_increase, rise)
            record.n_accepted += 1

            ut_norm_sq = discrete_l2_norm_sq(grid, (both - state.values) / dt_try)
            bar.update(new_state.time_stamp - t)
            state, report = new_state, report_new

            streak += 1
            if streak >= config.grow_after:
                dt = min(dt * config.grow_factor, config.dt_max)
                streak = 0

            snapshot_hit = bool(pending) and lands and target == pending[0]
            done = config.t_end - state.time_stamp <= landing_tol
            if snapshot_hit or done or record.n_accepted % config.observer_stride == 0:
                row = _observe(state, report, dt_try, ut_norm_sq, diss, pattern)
                previous_state, previous_row = last_observed
                if row.n_layers < previous_row.n_layers:
                    record.checkpoints[previous_row.t] = previous_state
                record.series.append(row)
                last_observed = (state, row)
                for observer in observers:
                    observer(state, row)
            while pending and pending[0] <= state.time_stamp + landing_tol:
                record.snapshots[pending.pop(0)] = state
    finally:
        bar.close()

    record.final = state
    record.status = "completed"
    return record


def resume(record: RunRecord, t0: float, values: np.ndarray, t_end: float) -> Field:
    """
    State at t_end re-simulated from (t0, values) with the record's settings.

    Starts from the dt the record used around t0, so short re-runs skip the
    initial ramp-up from dt_init.
    """
    config = record.config
    dt_hint = config.dt_init
    for row in record.series:
        if row.t > t0:
            break
        if row.dt > 0:
            dt_hint = row.dt
    dt_hint = min(max(dt_hint, config.dt_min), config.dt_max)
    short = replace(config, t_end=float(t_end), snapshot_times=(), dt_init=dt_hint,
                    observer_stride=10 ** 9)
    start = Field(record.initial.grid, values, float(t0))
    return evolve(start, short).final


def _apriori_terms(record: RunRecord, margin: float) -> Tuple[float, float]:
    initial_energy = energy(record.initial, record.config.potential, record.config.model,
                            record.config.eps).total
    bound = 2.0 * initial_energy * (1.0 + margin) / record.config.eps
    states = [record.initial, *record.snapshots.values()]
    if record.final is not None:
        states.append(record.final)
    worst = max(gradient_l2_norm_sq(s) for s in states)
    return bound, worst


def apriori_gradient_check(record: RunRecord, eps: Optional[float] = None, margin: float = 0.1) -> bool:
    """
    ||u_x||^2_L2 <= C/eps at every stored state, with C = 2 E[u0] (1 + margin).

    The Minkowski energy density dominates eps p^2 / 2, so a non-increasing
    energy gives this bound.
    """
    if not record.config.model.is_minkowski:
        raise InvalidArgumentError("the a-priori gradient bound applies to Minkowski runs only")
    if eps is not None and not np.isclose(eps, record.config.eps):
        raise InvalidArgumentError(f"eps {eps} does not match the run's eps {record.config.eps}")
    bound, worst = _apriori_terms(record, margin)
    return bool(worst <= bound)


def apriori_gradient_report(record: RunRecord, margin: float = 0.1) -> Dict:
    bound, worst = _apriori_terms(record, margin)
    return {"passed": bool(worst <= bound), "bound": bound, "max_gradient_l2_sq": worst,
            "margin": margin}
