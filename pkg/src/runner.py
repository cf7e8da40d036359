"""
Scenario runner: evolve, diagnose and write the output files of one run,
and sweep a parameter over several runs in parallel.

Outputs of a run directory:
    series.csv             t, dt, energy parts, dissipation residual, L1 distance, layers
    snapshots/t_<t>.csv    x, u at each requested snapshot time
    report.json            certificates, collapse events, costs, verdicts, config echo
    run.log                console summary of the run
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

import diagnostics
import energy as en
import potentials as pot
import scenarios
import solver
from errors import (ConditionError, DomainError, HypothesisNotMet, InvalidArgumentError,
                    ScenarioError, SolverAbort)
from paths import output_root

REPORT_SCHEMA = "slowlayers.report/1"
SWEEP_SCHEMA = "slowlayers.sweep/1"
SERIES_COLUMNS = ("t", "dt", "energy", "energy_gradient_part", "energy_potential_part",
                  "dissipation_residual", "l1_to_v", "n_layers", "interfaces")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER_ABORT = 2
EXIT_PARTIAL_SWEEP = 3


def fmt(value: float) -> str:
    """Shortest round-trip decimal form of a float."""
    return repr(float(value))


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


class RunLog:
    """Prints status lines and keeps them for run.log."""

    def __init__(self, quiet: bool = False):
        self.quiet = quiet
        self.lines: List[str] = []

    def __call__(self, message: str = ""):
        self.lines.append(message)
        if not self.quiet:
            print(message)

    def write(self, path: Path):
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(self.lines) + "\n")


@dataclass
class RunOutcome:
    exit_code: int
    output_dir: Optional[Path]
    record: Optional[solver.RunRecord] = None
    report: Dict[str, Any] = field(default_factory=dict)


def write_series(path: Path, record: solver.RunRecord):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SERIES_COLUMNS)
        for row in record.series:
            writer.writerow([fmt(row.t), fmt(row.dt), fmt(row.energy), fmt(row.energy_gradient_part),
                             fmt(row.energy_potential_part), fmt(row.dissipation_residual),
                             fmt(row.l1_to_v), row.n_layers, ";".join(fmt(p) for p in row.interfaces)])


def write_snapshot(path: Path, state):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("x", "u"))
        for x, u in zip(state.x, state.values):
            writer.writerow((fmt(x), fmt(u)))


def _initial_certificates(scenario, u0, pattern, log: RunLog) -> Dict[str, Any]:
    """Transition costs, layer-structure certificate and lower-bound margin at t = 0."""
    settings = scenario.certificates
    A, C, delta = settings.get("A"), settings.get("C", 1.0), settings.get("delta")
    C = 1.0 if C is None else C
    out: Dict[str, Any] = {}
    try:
        costs = en.transition_costs(scenario.potential, scenario.eps)
        out["transition_costs"] = costs.to_dict()
    except ConditionError as e:
        log(f"⚠️  Transition costs unavailable: {e}")
        out["transition_costs"] = None
        return out

    cert = en.layer_structure_certificate(u0, pattern, scenario.potential, scenario.model,
                                          scenario.eps, A=A, C=C)
    out["layer_structure"] = cert.to_dict()
    mark = "✓" if cert.passed else "⚠️ "
    log(f"{mark} Layer structure at t=0: N={pattern.n_layers}, "
        f"excess={cert.measurements['energy_excess']:.3e}, "
        f"allowed={cert.measurements['allowed_excess']:.3e}")

    try:
        margin = en.lower_bound_check(u0, pattern, scenario.potential, scenario.model,
                                      scenario.eps, A=A, C=C, delta=delta)
        out["lower_bound"] = {"checked": True, "margin": margin, "passed": margin >= 0}
        log(f"{'✓' if margin >= 0 else '❌'} Lower bound margin at t=0: {margin:.3e}")
    except HypothesisNotMet as e:
        out["lower_bound"] = {"checked": False, "reason": str(e),
                              "distance": e.distance, "delta": e.delta}
        log(f"⚠️  Lower bound skipped: {e}")
    return out


def _run_diagnostics(scenario, record: solver.RunRecord, log: RunLog) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    events = []
    if scenario.wants("collapse_detection"):
        events = diagnostics.detect_collapses(record)
        out["collapse_events"] = [e.to_dict() for e in events]
        for e in events:
            log(f"   collapse at t≈{e.t_event:.4g}: {e.layers_before} -> {e.layers_after} layers, "
                f"pair ({e.vanished_pair[0]:.3f}, {e.vanished_pair[1]:.3f}), "
                f"met near ({e.collapse_site[0]:.3f}, {e.collapse_site[1]:.3f})")
        if not events:
            log("   no collapse events")

    if scenario.wants("certificates") and record.pattern is not None:
        settings = scenario.certificates
        delta1 = settings.get("delta1")
        delta1 = record.pattern.r if delta1 is None else delta1
        A = settings.get("A")
        if A is None:
            A = en.default_rate(record.pattern, scenario.potential)
        if delta1 > 0:
            cert = diagnostics.slow_motion_certificate(record, delta1, A=A)
            out["slow_motion"] = cert.to_dict()
            log(f"{'✓' if cert.passed else '⚠️ '} Slow motion: exit time "
                f"{cert.measurements.get('exit_time')}, reference exp(A/eps) = "
                f"{cert.measurements['reference_time']:.4g} ({cert.measurements.get('verdict', 'pass')})")
        out["plateau_drift"] = diagnostics.plateau_drift(record, events)
        out["triangle_consistency"] = diagnostics.triangle_consistency(record).to_dict()

    if scenario.model.is_minkowski:
        verdict = solver.apriori_gradient_report(record)
        out["apriori_gradient"] = verdict
        log(f"{'✓' if verdict['passed'] else '❌'} A-priori gradient bound: "
            f"max ||u_x||^2 = {verdict['max_gradient_l2_sq']:.4g} <= {verdict['bound']:.4g}")
    return out


def run_scenario(scenario: scenarios.Scenario, output_dir: Optional[Path] = None,
                 t_end: Optional[float] = None, progress: bool = True,
                 quiet: bool = False) -> RunOutcome:
    """
    Run one scenario and write its output directory.

    Args:
        scenario: validated scenario
        output_dir: overrides scenario.output_dir and the default data/output/<name>
        t_end: optional shorter horizon (snapshot times beyond it are dropped)
        progress: show a tqdm bar over simulated time
        quiet: keep console output for run.log only

    Returns:
        RunOutcome with exit code 0, 1 (datum rejected) or 2 (solver abort)
    """
    log = RunLog(quiet=quiet)
    out_dir = Path(output_dir or scenario.output_dir or output_root() / scenario.name)
    (out_dir / "snapshots").mkdir(parents=True, exist_ok=True)

    horizon = scenario.t_end if t_end is None else float(t_end)
    snapshot_times = tuple(t for t in scenario.snapshot_times if t <= horizon)
    config_echo = scenario.to_dict()
    config_echo["t_end"] = horizon
    config_echo["snapshot_times"] = list(snapshot_times)

    log("=" * 70)
    log(f"SlowLayers run: {scenario.name}")
    log("=" * 70)
    log(f"   model={scenario.model.kind}, potential={scenario.potential.name}, eps={scenario.eps:g}, "
        f"grid=[{scenario.grid.a:g}, {scenario.grid.b:g}] x {scenario.grid.n_cells}, t_end={horizon:g}")

    report: Dict[str, Any] = {"schema": REPORT_SCHEMA, "scenario": scenario.name, "config": config_echo}
    validation = pot.validate_double_well(scenario.potential)
    report["potential_validation"] = validation.to_dict()
    if validation.warnings:
        log(f"⚠️  Potential {scenario.potential.name}: {', '.join(validation.warnings)} not met (degenerate wells)")
    try:
        config = scenarios.solver_config(scenario, t_end=horizon, snapshot_times=snapshot_times)
        config_echo["solver"] = {k: v for k, v in config.to_dict().items() if k in scenarios.SOLVER_KEYS}
        u0, pattern = scenarios.build_initial(scenario)
        report["pattern"] = pattern.to_dict()
        log(f"✓ Initial datum: {scenario.initial['kind']}, {pattern.n_layers} layers, r={pattern.r:g}")
        if scenario.wants("certificates"):
            report["initial_certificates"] = _initial_certificates(scenario, u0, pattern, log)
        record = solver.evolve(u0, config, pattern=pattern, progress=progress and not quiet)
        exit_code = EXIT_OK
    except SolverAbort as e:
        record = e.record
        exit_code = EXIT_SOLVER_ABORT
        log(f"❌ Solver aborted: {e}")
    except (ConditionError, DomainError, InvalidArgumentError) as e:
        log(f"❌ Initial datum rejected: {e}")
        report["status"] = "rejected"
        report["error"] = str(e)
        _write_report(out_dir, report)
        log.write(out_dir / "run.log")
        return RunOutcome(EXIT_VALIDATION, out_dir, None, report)

    report["status"] = record.status
    report["run"] = record.summary()
    log(f"{'✓' if record.energy_monotone else '❌'} Energy monotone over {record.n_accepted} accepted steps "
        f"({record.n_rejected} rejected)")
    log(f"{'✓' if record.dissipation_ok else '⚠️ '} Dissipation ratio max |dE + dt ||u_t||^2/eps|/dt^2 = "
        f"{record.max_dissipation_ratio:.3g}")
    report["diagnostics"] = _run_diagnostics(scenario, record, log)

    if scenario.wants("energy_series"):
        write_series(out_dir / "series.csv", record)
    for t, state in sorted(record.snapshots.items()):
        write_snapshot(out_dir / "snapshots" / f"t_{fmt(t)}.csv", state)
    if record.final is not None:
        report["final"] = {"t": record.final.time_stamp, "n_layers": diagnostics.count_layers(record.final),
                           "max_abs_deviation_from_one": float(np.max(np.abs(np.abs(record.final.values) - 1.0)))}

    _write_report(out_dir, report)
    mark = "✓" if exit_code == EXIT_OK else "⚠️ "
    log(f"{mark} Outputs written to {out_dir}" + ("" if exit_code == EXIT_OK else " (partial, flagged aborted)"))
    log.write(out_dir / "run.log")
    return RunOutcome(exit_code, out_dir, record, report)


def _write_report(out_dir: Path, report: Dict[str, Any]):
    with open(out_dir / "report.json", "w", encoding="utf-8") as f:
        json.dump(_jsonable(report), f, indent=2, ensure_ascii=False)


def _sweep_job(data: Dict[str, Any], out_dir: Path, t_end: Optional[float]) -> Dict[str, Any]:
    try:
        scenario = scenarios.parse_scenario(data)
        outcome = run_scenario(scenario, output_dir=out_dir, t_end=t_end, progress=False, quiet=True)
    except ScenarioError as e:
        return {"name": data.get("name"), "exit_code": EXIT_VALIDATION, "error": str(e), "collapse_times": []}
    except Exception as e:  # noqa: BLE001
        return {"name": data.get("name"), "exit_code": EXIT_SOLVER_ABORT, "error": f"{type(e).__name__}: {e}",
                "collapse_times": []}
    events = outcome.report.get("diagnostics", {}).get("collapse_events", [])
    return {"name": scenario.name, "exit_code": outcome.exit_code, "error": outcome.report.get("error"),
            "collapse_times": [e["t_event"] for e in events]}


def fit_laws(parameter: str, values: Sequence[float], times: Sequence[float]) -> Dict[str, Any]:
    """
    Fit log t against 1/x (exponential law, x = eps) or x (x = separation),
    and log t against log x (algebraic law). Residuals are RMS in log t.
    """
    x = np.asarray(values, dtype=float)
    y = np.log(np.asarray(times, dtype=float))
    if x.size < 2:
        return {"exponential": None, "algebraic": None, "points": int(x.size)}

    def line(abscissa):
        slope, intercept = np.polyfit(abscissa, y, 1)
        residual = float(np.sqrt(np.mean((y - (slope * abscissa + intercept)) ** 2)))
        return {"slope": float(slope), "intercept": float(intercept), "residual": residual}

    exponential = line(1.0 / x if parameter == "eps" else x)
    algebraic = line(np.log(x)) if np.all(x > 0) else None
    return {"exponential": exponential, "algebraic": algebraic, "points": int(x.size)}


def _reference_slopes(base: Dict[str, Any], parameter: str) -> Optional[Dict[str, float]]:
    """
    Slopes of log t against 1/eps to compare an eps sweep with: the closest
    separation d of the base datum, and sqrt(lambda) d, the decay rate of the
    tail interaction between two layers at that distance.
    """
    initial = base.get("initial") or {}
    jumps = sorted(initial.get("jumps") or [])
    if parameter != "eps" or initial.get("kind") != scenarios.LAYER_PATTERN or len(jumps) < 2:
        return None
    try:
        lam = pot.lambda_min(pot.parse_potential(base.get("potential", "")))
    except (InvalidArgumentError, ValueError):
        return None
    d = float(np.min(np.diff(jumps)))
    return {"separation": d, "lambda": lam, "sqrt_lambda_separation": float(np.sqrt(max(lam, 0.0)) * d)}


def sweep(base: Dict[str, Any], parameter: str, values: Sequence[float],
          output_dir: Optional[Path] = None, t_end: Optional[float] = None,
          n_jobs: int = -1) -> Dict[str, Any]:
    """
    Run base with one parameter swept over values, concurrently, each run in
    its own output directory; aggregate first-collapse times and fit them.

    Failed runs are recorded and the sweep continues.
    """
    datasets = [scenarios.with_override(base, parameter, v) for v in values]
    for data in datasets:
        data.setdefault("diagnostics", {})["collapse_detection"] = True
    root = Path(output_dir or output_root() / f"{base.get('name', 'sweep')}-sweep-{parameter}")
    root.mkdir(parents=True, exist_ok=True)

    print(f"Sweeping {parameter} over {list(values)} ({len(values)} runs)")
    jobs = (delayed(_sweep_job)(data, root / f"{parameter}={fmt(v)}", t_end)
            for data, v in zip(datasets, values))
    results = Parallel(n_jobs=n_jobs if len(datasets) > 1 else 1)(jobs)

    runs, fit_x, fit_t = [], [], []
    for v, result in zip(values, results):
        first = result["collapse_times"][0] if result["collapse_times"] else None
        runs.append({"value": v, **result, "first_collapse": first})
        if result["exit_code"] == EXIT_OK and first is not None:
            fit_x.append(float(v))
            fit_t.append(first)
            print(f"✓ {parameter}={v}: first collapse at t≈{first:.4g}")
        elif result["exit_code"] == EXIT_OK:
            print(f"⚠️  {parameter}={v}: no collapse within the horizon")
        else:
            print(f"⚠️  {parameter}={v}: failed ({result.get('error')})")

    failures = sum(1 for r in runs if r["exit_code"] != EXIT_OK)
    summary = {
        "schema": SWEEP_SCHEMA,
        "base": base.get("name"),
        "parameter": parameter,
        "values": list(values),
        "runs": runs,
        "fits": fit_laws(parameter, fit_x, fit_t),
        "reference_slopes": _reference_slopes(base, parameter),
        "failures": failures,
        "exit_code": EXIT_PARTIAL_SWEEP if failures else EXIT_OK,
    }
    with open(root / "sweep.json", "w", encoding="utf-8") as f:
        json.dump(_jsonable(summary), f, indent=2)
    summary["output_dir"] = str(root)
    return summary
