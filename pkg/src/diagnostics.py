"""
Interfaces, distances and slow-motion diagnostics over fields and run records.

Interfaces are preimages I_K[u] = u^{-1}(K) of a level set K that avoids the
wells +-1; the default K = {0} tracks layer positions. Collapse detection and
the slow-motion certificate read the interface series stored in a RunRecord.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import InvalidArgumentError, SolverAbort, UndefinedDistance
from grid import Field
from profiles import LayerPattern, make_pattern

BISECTION_RTOL = 0.01


@dataclass(frozen=True)
class LevelSet:
    """Finite union of points and closed intervals in R minus {-1, +1}."""

    points: Tuple[float, ...] = (0.0,)
    intervals: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        points = tuple(float(c) for c in self.points)
        intervals = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "intervals", intervals)
        if not points and not intervals:
            raise InvalidArgumentError("level set K must not be empty")
        for c in points:
            if abs(c) == 1.0:
                raise InvalidArgumentError(f"level set K must avoid +-1, got point {c}")
        for lo, hi in intervals:
            if lo > hi:
                raise InvalidArgumentError(f"interval [{lo}, {hi}] is reversed")
            if lo <= -1.0 <= hi or lo <= 1.0 <= hi:
                raise InvalidArgumentError(f"level set K must avoid +-1, got interval [{lo}, {hi}]")

    @property
    def is_default(self) -> bool:
        return self.points == (0.0,) and not self.intervals

    def describe(self) -> str:
        parts = [repr(c) for c in self.points] + [f"[{lo!r}, {hi!r}]" for lo, hi in self.intervals]
        return "{" + ", ".join(parts) + "}"


ZERO_LEVEL = LevelSet()


@dataclass(frozen=True)
class InterfaceSet:
    positions: Tuple[float, ...]
    level: LevelSet = ZERO_LEVEL

    def __len__(self) -> int:
        return len(self.positions)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=float)


def _crossings(x: np.ndarray, values: np.ndarray, c: float) -> np.ndarray:
    """
    Locations where values - c changes sign, by linear interpolation.

    A run of nodes sitting exactly on c between opposite signs counts once,
    at the midpoint of the run; touching c without a sign change does not count.
    """
    w = values - c
    nonzero = np.flatnonzero(w != 0.0)
    if nonzero.size < 2:
        return np.empty(0)
    i, j = nonzero[:-1], nonzero[1:]
    flips = np.sign(w[i]) != np.sign(w[j])
    i, j = i[flips], j[flips]

    adjacent = j == i + 1
    out = np.empty(i.size)
    ia, ja = i[adjacent], j[adjacent]
    out[adjacent] = x[ia] - w[ia] * (x[ja] - x[ia]) / (w[ja] - w[ia])
    ir, jr = i[~adjacent], j[~adjacent]
    out[~adjacent] = 0.5 * (x[ir + 1] + x[jr - 1])
    return out


def interface(field_: Field, K: Optional[LevelSet] = None) -> InterfaceSet:
    """
    I_K[u] located on the grid.

    Points of K contribute their sign-change locations; intervals contribute
    the crossings of their two endpoints (the boundary of the preimage).
    """
    K = ZERO_LEVEL if K is None else K
    x, u = field_.x, field_.values
    levels = list(K.points) + [c for iv in K.intervals for c in iv]
    found = [_crossings(x, u, c) for c in levels]
    positions = np.unique(np.concatenate(found)) if found else np.empty(0)
    return InterfaceSet(positions=tuple(float(p) for p in positions), level=K)


def hausdorff(A, B) -> float:
    """max(sup_A d(alpha, B), sup_B d(beta, A)) for finite nonempty sets."""
    a = A.as_array() if isinstance(A, InterfaceSet) else np.asarray(A, dtype=float).ravel()
    b = B.as_array() if isinstance(B, InterfaceSet) else np.asarray(B, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise UndefinedDistance(
            f"Hausdorff distance is undefined for an empty set (sizes {a.size}, {b.size})")
    gaps = np.abs(a[:, None] - b[None, :])
    return float(max(gaps.min(axis=1).max(), gaps.min(axis=0).max()))


def count_layers(field_: Field) -> int:
    """Number of transition layers, i.e. sign changes of u."""
    return len(interface(field_))


def l1_distance_to_pattern(field_: Field, pattern: LayerPattern) -> float:
    """
    ||u - v||_L1 by the trapezoid rule on the nodes.

    Cells with a jump strictly inside are split at the jump and integrated
    against the one-sided values of v, with u interpolated linearly there.
    """
    grid = field_.grid
    x, u = grid.x, field_.values
    diff = np.abs(u - pattern.v(x))
    cell_integrals = 0.5 * grid.h * (diff[:-1] + diff[1:])

    jumps = np.asarray(pattern.jumps, dtype=float)
    if jumps.size:
        cells = np.clip(np.searchsorted(x, jumps, side="right") - 1, 0, grid.n_cells - 1)
        tol = pattern.jump_tol
        inside = (jumps > x[cells] + tol) & (jumps < x[cells + 1] - tol)
        for cell in np.unique(cells[inside]):
            lo, hi = x[cell], x[cell + 1]
            breaks = np.concatenate([[lo], jumps[(jumps > lo) & (jumps < hi)], [hi]])
            ub = np.interp(breaks, x[cell:cell + 2], u[cell:cell + 2])
            vb = pattern.v(0.5 * (breaks[:-1] + breaks[1:]))
            pieces = 0.5 * np.diff(breaks) * (np.abs(ub[:-1] - vb) + np.abs(ub[1:] - vb))
            cell_integrals[cell] = float(np.sum(pieces))
    return float(np.sum(cell_integrals))


def l1_distance(left: Field, right: Field) -> float:
    """||u - w||_L1 of two fields on the same grid (nodal trapezoid)."""
    if left.grid != right.grid:
        raise InvalidArgumentError("fields live on different grids")
    return float(np.sum(left.grid.weights * np.abs(left.values - right.values)))


def pattern_from_field(field_: Field, r: Optional[float] = None) -> LayerPattern:
    """Step pattern read off a field: jumps at its zero crossings, sign of u near a."""
    positions = interface(field_).positions
    nonzero = field_.values[field_.values != 0.0]
    first_sign = -1 if nonzero.size == 0 or nonzero[0] < 0 else 1
    return make_pattern(field_.grid.a, field_.grid.b, positions, first_sign, r)


@dataclass(frozen=True)
class CollapseEvent:
    """
    A strict drop of the layer count.

    vanished_pair holds the lost interfaces where they sat when the plateau
    with layers_before layers began; collapse_site holds them at the lower end
    of the bisection bracket, where they have already drifted together. A
    single lost interface is paired with the nearer boundary.
    """

    t_event: float
    layers_before: int
    layers_after: int
    vanished_pair: Tuple[float, float]
    bracket: Tuple[float, float] = (float("nan"), float("nan"))
    refined: bool = True
    collapse_site: Tuple[float, float] = (float("nan"), float("nan"))

    def __post_init__(self):
        if not self.layers_after < self.layers_before:
            raise InvalidArgumentError(
                f"collapse needs fewer layers after ({self.layers_after}) than before ({self.layers_before})")

    def to_dict(self) -> Dict:
        return {"t_event": self.t_event, "layers_before": self.layers_before,
                "layers_after": self.layers_after, "vanished_pair": list(self.vanished_pair),
                "collapse_site": list(self.collapse_site),
                "bracket": list(self.bracket), "refined": self.refined}


def _lost_indices(before: Sequence[float], after: Sequence[float]) -> List[int]:
    """Indices of the interfaces of `before` farthest from any survivor, sorted."""
    before = np.asarray(before, dtype=float)
    after = np.asarray(after, dtype=float)
    if before.size == 0:
        return []
    if after.size:
        lost = np.abs(before[:, None] - after[None, :]).min(axis=1)
    else:
        lost = np.full(before.size, np.inf)
    order = np.argsort(-lost, kind="stable")
    drop = max(before.size - after.size, 1)
    return sorted(int(i) for i in order[:min(drop, 2, before.size)])


def _pair_at(positions: Sequence[float], indices: Sequence[int], a: float, b: float) -> Tuple[float, float]:
    if not indices:
        return (float("nan"), float("nan"))
    chosen = [float(positions[i]) for i in indices]
    if len(chosen) == 2:
        return (chosen[0], chosen[1])
    lone = chosen[0]
    wall = a if lone - a < b - lone else b
    return tuple(sorted((lone, float(wall))))


def _trace_back(start: Sequence[float], current: Sequence[float], lost: Sequence[int]) -> List[float]:
    """
    Positions in `start` of the interfaces current[lost]: by order when the
    counts agree, else by nearest neighbour.
    """
    if len(start) == len(current):
        return [float(start[i]) for i in lost]
    start = np.asarray(start, dtype=float)
    if start.size == 0:
        return [float(current[i]) for i in lost]
    return [float(start[int(np.argmin(np.abs(start - current[i])))]) for i in lost]


def _plateau_start(rows, k: int):
    """Interfaces of the first observation of the plateau ending at rows[k]."""
    count = rows[k].n_layers
    j = k
    while j > 0 and rows[j - 1].n_layers == count:
        j -= 1
    return rows[j].interfaces


def detect_collapses(record, rtol: float = BISECTION_RTOL) -> List[CollapseEvent]:
    """
    Collapse events at each strict drop of the recorded layer count.

    When the record holds a checkpoint at the observation before the drop,
    t_event is refined by bisection, re-simulating from the latest state known
    to carry the old count until the bracket is within rtol of its upper end.
    The lost interfaces are found at the bracket and traced back along the
    plateau; interfaces keep their order while the count is constant.
    """
    from solver import resume

    rows = record.series
    events = []
    grid = record.initial.grid
    for k in range(1, len(rows)):
        before, after = rows[k - 1], rows[k]
        if after.n_layers >= before.n_layers:
            continue

        lo, hi = before.t, after.t
        lo_interfaces, hi_interfaces = before.interfaces, after.interfaces
        checkpoint = record.checkpoints.get(lo)
        refined = checkpoint is not None
        if refined:
            state = checkpoint
            while hi - lo > rtol * hi:
                mid = 0.5 * (lo + hi)
                try:
                    trial = resume(record, lo, state.values, mid)
                except SolverAbort:
                    refined = False
                    break
                found = interface(trial)
                if len(found) >= before.n_layers:
                    lo, state, lo_interfaces = mid, trial, found.positions
                else:
                    hi, hi_interfaces = mid, found.positions

        lost = _lost_indices(lo_interfaces, hi_interfaces)
        origin = _trace_back(_plateau_start(rows, k - 1), lo_interfaces, lost)
        events.append(CollapseEvent(
            t_event=float(hi if refined else 0.5 * (lo + hi)),
            layers_before=before.n_layers,
            layers_after=after.n_layers,
            vanished_pair=_pair_at(origin, range(len(origin)), grid.a, grid.b),
            bracket=(float(lo), float(hi)),
            refined=refined,
            collapse_site=_pair_at(lo_interfaces, lost, grid.a, grid.b),
        ))
    return events


def _interface_history(record, K: LevelSet):
    """(t, InterfaceSet) pairs: the full series for K = {0}, else the stored snapshots."""
    if K.is_default:
        return [(row.t, InterfaceSet(tuple(row.interfaces))) for row in record.series]
    states = [(record.initial.time_stamp, record.initial)]
    states += sorted(record.snapshots.items())
    return [(t, interface(state, K)) for t, state in states]


def slow_motion_certificate(record, delta1: float, K: Optional[LevelSet] = None,
                            A: Optional[float] = None):
    """
    Exit time t(delta1) = inf{t : d(I_K[u(t)], I_K[u0]) > delta1} against exp(A/eps).

    The verdict is "pass" when the interfaces stay put beyond exp(A/eps),
    "fail" when they leave earlier and "inconclusive" when the horizon ends
    before exp(A/eps) without an exit.
    """
    from energy import Certificate, default_rate

    K = ZERO_LEVEL if K is None else K
    eps = record.config.eps
    pattern = record.pattern
    if delta1 <= 0:
        raise InvalidArgumentError(f"delta1 must be positive, got {delta1}")
    if A is None:
        if pattern is None:
            raise InvalidArgumentError("slow_motion_certificate needs A when the record has no pattern")
        A = default_rate(pattern, record.config.potential)
    reference = float(np.exp(A / eps))

    history = _interface_history(record, K)
    t0, initial = history[0]
    horizon = history[-1][0]
    measurements = {"delta1": delta1, "A": A, "eps": eps, "reference_time": reference,
                    "horizon": horizon, "level_set": K.describe()}

    if len(initial) == 0:
        return Certificate("slow_motion", True, {**measurements, "exit_time": None},
                           ("no interfaces",))

    exit_time = None
    for t, current in history[1:]:
        distance = hausdorff(current, initial) if len(current) else float("inf")
        if distance > delta1:
            exit_time = t
            break

    if exit_time is not None:
        verdict = "pass" if exit_time - t0 > reference else "fail"
    else:
        verdict = "pass" if horizon - t0 > reference else "inconclusive"
    notes = []
    if pattern is not None and delta1 >= pattern.r:
        notes.append(f"delta1 = {delta1:g} is not below r = {pattern.r:g}")
    if exit_time is None:
        notes.append("exceeds horizon")
    if verdict == "inconclusive":
        notes.append("horizon ends before exp(A/eps)")
    measurements.update({"exit_time": exit_time, "verdict": verdict})
    return Certificate("slow_motion", verdict == "pass", measurements, tuple(notes))


def plateau_drift(record, events: Optional[Sequence[CollapseEvent]] = None) -> float:
    """Largest Hausdorff distance between I(t) and I(0) before the first collapse."""
    rows = record.series
    if not rows or not rows[0].interfaces:
        return 0.0
    stop = events[0].bracket[0] if events else float("inf")
    initial = rows[0].interfaces
    drift = 0.0
    for row in rows:
        if row.t > stop or not row.interfaces:
            break
        drift = max(drift, hausdorff(row.interfaces, initial))
    return drift


def triangle_consistency(record, tol: float = 1e-9):
    """
    ||u(t) - v|| <= ||u(t) - u0|| + ||u0 - v|| on every stored snapshot,
    a cross-check of the recorded L1 series.
    """
    from energy import Certificate

    if record.pattern is None:
        return Certificate("triangle_consistency", True, {"checked": 0}, ("no pattern",))
    base = l1_distance_to_pattern(record.initial, record.pattern)
    worst = -float("inf")
    checked = 0
    for t, state in sorted(record.snapshots.items()):
        lhs = l1_distance_to_pattern(state, record.pattern)
        rhs = l1_distance(state, record.initial) + base
        worst = max(worst, lhs - rhs)
        checked += 1
    # jump cells are split for v but not for u0, which costs at most 4h per jump
    allowance = tol * (1.0 + base) + 4.0 * record.initial.grid.h * record.pattern.n_layers
    passed = checked == 0 or worst <= allowance
    return Certificate("triangle_consistency", bool(passed),
                       {"checked": checked, "worst_slack": worst if checked else None})
