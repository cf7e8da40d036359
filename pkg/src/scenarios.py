"""
Scenario configuration: JSON files under config/scenarios/, validated in one
pass so that every problem is reported together.

A scenario names the domain, grid, eps, flux, potential, initial datum,
horizon, snapshot times, solver overrides, diagnostics toggles and
certificate constants. Initial data are one of

    layer-pattern   glued standing waves at given jumps
    formula         expression in x (see expressions.py)
    piecewise       constant values between breaks
"""

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

import expressions
import flux as fx
import potentials as pot
import profiles
from diagnostics import pattern_from_field
from errors import InvalidArgumentError, ScenarioError
from flux import FluxModel
from grid import Field, Grid1D
from paths import SCENARIOS_DIR, TEMPLATE_SCENARIO
from potentials import PotentialSpec
from profiles import LayerPattern
from solver import SolverConfig

SCHEMA_VERSION = 1

BUILTINS = (
    "exp1-euclidean",
    "exp1-minkowski",
    "exp2-euclidean",
    "exp2-minkowski",
    "exp3-euclidean-n2",
    "exp3-minkowski-n3",
)

LAYER_PATTERN = "layer-pattern"
FORMULA = "formula"
PIECEWISE = "piecewise"
DATUM_KINDS = (LAYER_PATTERN, FORMULA, PIECEWISE)

SOLVER_KEYS = ("dt_init", "dt_min", "dt_max", "newton_tol", "newton_max_iter", "local_error_tol",
               "observer_stride", "tol_diss", "energy_tol", "grow_after", "grow_factor", "max_damping")
DIAGNOSTIC_KEYS = ("certificates", "collapse_detection", "energy_series")
CERTIFICATE_KEYS = ("A", "C", "delta", "delta1")
TOP_LEVEL_KEYS = ("schema_version", "name", "description", "domain", "n_cells", "eps", "model",
                  "potential", "initial", "t_end", "snapshot_times", "solver", "diagnostics",
                  "certificates", "output_dir")


@dataclass(frozen=True)
class Scenario:
    name: str
    grid: Grid1D
    eps: float
    model: FluxModel
    potential: PotentialSpec
    initial: Dict[str, Any]
    t_end: float
    snapshot_times: Tuple[float, ...]
    solver: Dict[str, Any] = field(default_factory=dict)
    diagnostics: Dict[str, bool] = field(default_factory=dict)
    certificates: Dict[str, Any] = field(default_factory=dict)
    output_dir: Optional[str] = None
    description: str = ""
    source: Dict[str, Any] = field(default_factory=dict, repr=False, compare=False)

    def wants(self, toggle: str) -> bool:
        return bool(self.diagnostics.get(toggle, True))

    def to_dict(self) -> Dict[str, Any]:
        """Complete resolved configuration, defaults filled in."""
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "description": self.description,
            "domain": [self.grid.a, self.grid.b],
            "n_cells": self.grid.n_cells,
            "eps": self.eps,
            "model": self.model.to_dict(),
            "potential": self.potential.to_dict(),
            "initial": copy.deepcopy(self.initial),
            "t_end": self.t_end,
            "snapshot_times": list(self.snapshot_times),
            "solver": {k: v for k, v in solver_config(self).to_dict().items() if k in SOLVER_KEYS},
            "diagnostics": {key: self.wants(key) for key in DIAGNOSTIC_KEYS},
            "certificates": {key: self.certificates.get(key) for key in CERTIFICATE_KEYS},
            "output_dir": self.output_dir,
        }


def _number(data: Dict, key: str, problems: List[str], positive: bool = False) -> Optional[float]:
    value = data.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"'{key}' must be a number, got {value!r}")
        return None
    if positive and not value > 0:
        problems.append(f"'{key}' must be positive, got {value}")
        return None
    return float(value)


def _optional_number(data: Dict, key: str, problems: List[str], where: str = "",
                     positive: bool = False, integer: bool = False) -> bool:
    """Check an optional numeric key (null or absent allowed); False when it is invalid."""
    value = data.get(key)
    if value is None:
        return True
    kind = int if integer else (int, float)
    if isinstance(value, bool) or not isinstance(value, kind):
        problems.append(f"'{where}{key}' must be {'an integer' if integer else 'a number'} or null, got {value!r}")
        return False
    if positive and not value > 0:
        problems.append(f"'{where}{key}' must be positive, got {value}")
        return False
    return True


def _numbers(values: Any) -> bool:
    return isinstance(values, list) and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in values)


def _datum_problems(initial: Any, a: Optional[float], b: Optional[float], model: Optional[FluxModel],
                    potential: Optional[PotentialSpec], eps: Optional[float]) -> List[str]:
    problems = []
    if not isinstance(initial, dict):
        return [f"'initial' must be an object, got {initial!r}"]
    kind = initial.get("kind")
    if kind not in DATUM_KINDS:
        return [f"initial.kind must be one of {DATUM_KINDS}, got {kind!r}"]

    if kind == LAYER_PATTERN:
        jumps = initial.get("jumps")
        if not isinstance(jumps, list) or not all(isinstance(h, (int, float)) for h in jumps):
            problems.append("initial.jumps must be a list of numbers")
            jumps = None
        first_sign = initial.get("first_sign", -1)
        if isinstance(first_sign, bool) or first_sign not in (-1, 1):
            problems.append(f"initial.first_sign must be -1 or 1, got {first_sign!r}")
            first_sign = None
        r_ok = _optional_number(initial, "r", problems, "initial.")
        if r_ok and initial.get("r") is not None and initial["r"] < 0:
            problems.append(f"'initial.r' must be nonnegative, got {initial['r']}")
            r_ok = False
        r = initial.get("r")
        if _optional_number(initial, "eta", problems, "initial.", positive=True):
            if initial.get("eta") is not None and not initial["eta"] < 0.5:
                problems.append(f"'initial.eta' must lie in (0, 0.5), got {initial['eta']}")
        if _optional_number(initial, "n_knots", problems, "initial.", integer=True):
            if initial.get("n_knots") is not None and initial["n_knots"] < 3:
                problems.append(f"'initial.n_knots' must be at least 3, got {initial['n_knots']}")
        if jumps is not None and a is not None and b is not None and first_sign is not None and r_ok:
            radius = profiles.infer_radius(a, b, sorted(jumps)) if r is None else r
            problems += [f"initial: {p}" for p in
                         profiles.pattern_problems(a, b, sorted(jumps), first_sign, radius)]
        profile_potential = potential
        if initial.get("profile_potential") is not None:
            try:
                profile_potential = pot.parse_potential(initial["profile_potential"])
            except (InvalidArgumentError, ValueError) as e:
                problems.append(f"initial.profile_potential: {e}")
                profile_potential = None
        if profile_potential is not None and eps is not None and model is not None:
            if min(pot.evaluate(profile_potential, -1.0, 2), pot.evaluate(profile_potential, 1.0, 2)) <= 0:
                problems.append("layer-pattern profiles need F''(+-1) > 0; set initial.profile_potential "
                                "to a non-degenerate potential (e.g. \"quartic\")")
            elif model.kind == fx.EUCLIDEAN and not profiles.check_maxF_condition(profile_potential, eps):
                problems.append(f"Euclidean standing wave needs {profiles.MAXF_MESSAGE}")

    elif kind == FORMULA:
        text = initial.get("expression")
        if not isinstance(text, str):
            problems.append("initial.expression must be a string")
        else:
            try:
                expressions.parse_expression(text, "x")
            except InvalidArgumentError as e:
                problems.append(f"initial.expression: {e}")

    else:
        breaks, values = initial.get("breaks"), initial.get("values")
        if not _numbers(breaks) or not _numbers(values):
            problems.append("piecewise datum needs lists of numbers 'breaks' and 'values'")
            breaks = None
        elif len(values) != len(breaks) + 1:
            problems.append(f"piecewise datum needs len(values) = len(breaks) + 1, "
                            f"got {len(values)} and {len(breaks)}")
        elif any(np.diff(breaks) <= 0):
            problems.append("piecewise breaks must be strictly increasing")
        elif a is not None and b is not None and breaks and (breaks[0] <= a or breaks[-1] >= b):
            problems.append(f"piecewise breaks must lie inside ({a}, {b})")
        _optional_number(initial, "at_breaks", problems, "initial.")
        if model is not None and model.is_minkowski and breaks:
            problems.append("Minkowski runs reject discontinuous initial data (piecewise datum with jumps)")
    return problems


def scenario_problems(data: Any) -> List[str]:
    """Every validation problem of a raw scenario dict (empty when it validates)."""
    if not isinstance(data, dict):
        return [f"scenario must be a JSON object, got {type(data).__name__}"]
    problems = []
    unknown = sorted(set(data) - set(TOP_LEVEL_KEYS))
    if unknown:
        problems.append(f"unknown keys: {unknown}")
    if data.get("schema_version") != SCHEMA_VERSION:
        problems.append(f"schema_version must be {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
    if not isinstance(data.get("name"), str) or not data.get("name"):
        problems.append("'name' must be a non-empty string")

    a = b = None
    domain = data.get("domain")
    if (isinstance(domain, list) and len(domain) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in domain)):
        if domain[0] < domain[1]:
            a, b = float(domain[0]), float(domain[1])
        else:
            problems.append(f"domain needs a < b, got {domain}")
    else:
        problems.append(f"'domain' must be [a, b], got {domain!r}")

    n_cells = data.get("n_cells")
    if not isinstance(n_cells, int) or isinstance(n_cells, bool) or n_cells < 4:
        problems.append(f"'n_cells' must be an integer >= 4, got {n_cells!r}")
    eps = _number(data, "eps", problems, positive=True)
    t_end = _number(data, "t_end", problems, positive=True)

    model = potential = None
    try:
        model = fx.parse_flux(data.get("model", ""))
    except InvalidArgumentError as e:
        problems.append(f"model: {e}")
    try:
        potential = pot.parse_potential(data.get("potential", ""))
    except (InvalidArgumentError, ValueError) as e:
        problems.append(f"potential: {e}")
    if potential is not None:
        report = pot.validate_double_well(potential)
        problems += [f"potential {potential.name} is not a double well: {name} fails" for name in report.failures]

    snaps = data.get("snapshot_times", [])
    if not isinstance(snaps, list) or not all(isinstance(t, (int, float)) for t in snaps):
        problems.append("'snapshot_times' must be a list of numbers")
    elif t_end is not None and any(t < 0 or t > t_end for t in snaps):
        problems.append(f"snapshot times must lie in [0, t_end = {t_end:g}]")

    for section, keys in (("solver", SOLVER_KEYS), ("diagnostics", DIAGNOSTIC_KEYS),
                          ("certificates", CERTIFICATE_KEYS)):
        block = data.get(section, {})
        if not isinstance(block, dict):
            problems.append(f"'{section}' must be an object")
            continue
        extra = sorted(set(block) - set(keys))
        if extra:
            problems.append(f"unknown {section} keys: {extra}; allowed {list(keys)}")
        if section == "certificates":
            _optional_number(block, "A", problems, "certificates.")
            for key in ("C", "delta", "delta1"):
                _optional_number(block, key, problems, "certificates.", positive=True)
        elif section == "diagnostics":
            problems += [f"'diagnostics.{key}' must be true or false, got {value!r}"
                         for key, value in block.items() if key in keys and not isinstance(value, bool)]

    if not problems and eps is not None and t_end is not None and model is not None and potential is not None:
        try:
            SolverConfig(eps=eps, model=model, potential=potential, t_end=t_end,
                         snapshot_times=tuple(snaps), **data.get("solver", {}))
        except (InvalidArgumentError, TypeError) as e:
            problems.append(f"solver: {e}")

    problems += _datum_problems(data.get("initial"), a, b, model, potential, eps)
    return problems


def parse_scenario(data: Dict[str, Any]) -> Scenario:
    """Validate a raw scenario dict and build a Scenario; ScenarioError lists all problems."""
    problems = scenario_problems(data)
    if problems:
        raise ScenarioError(problems)
    a, b = data["domain"]
    return Scenario(
        name=data["name"],
        grid=Grid1D(float(a), float(b), int(data["n_cells"])),
        eps=float(data["eps"]),
        model=fx.parse_flux(data["model"]),
        potential=pot.parse_potential(data["potential"]),
        initial=copy.deepcopy(data["initial"]),
        t_end=float(data["t_end"]),
        snapshot_times=tuple(sorted(float(t) for t in data.get("snapshot_times", []))),
        solver=dict(data.get("solver", {})),
        diagnostics=dict(data.get("diagnostics", {})),
        certificates=dict(data.get("certificates", {})),
        output_dir=data.get("output_dir"),
        description=data.get("description", ""),
        source=copy.deepcopy(data),
    )


def read_scenario_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path.name} is not valid JSON: {e}") from e


def load_scenario(path: Union[str, Path]) -> Scenario:
    return parse_scenario(read_scenario_file(path))


def builtin_path(name: str) -> Path:
    if name not in BUILTINS:
        raise ScenarioError(f"unknown built-in '{name}'; choose one of {list(BUILTINS)}")
    return SCENARIOS_DIR / f"{name}.json"


def load_builtin(name: str) -> Scenario:
    return load_scenario(builtin_path(name))


def list_scenarios() -> List[Dict[str, str]]:
    """Catalog of built-ins: name, description and config file."""
    catalog = []
    for name in BUILTINS:
        data = read_scenario_file(builtin_path(name))
        catalog.append({"name": name, "description": data.get("description", ""),
                        "path": str(builtin_path(name))})
    return catalog


def template() -> Dict[str, Any]:
    return read_scenario_file(TEMPLATE_SCENARIO)


def with_override(data: Dict[str, Any], parameter: str, value: Any) -> Dict[str, Any]:
    """
    Copy of a raw scenario with one sweep parameter replaced.

    eps           the layer width
    n             degeneracy of a "degenerate:n=K" potential
    separation    distance of the two innermost jumps, moved symmetrically
                  about their midpoint (layer-pattern data)
    """
    out = copy.deepcopy(data)
    if parameter == "eps":
        out["eps"] = float(value)
    elif parameter == "n":
        out["potential"] = f"degenerate:n={int(value)}"
    elif parameter == "separation":
        initial = out.get("initial", {})
        jumps = sorted(initial.get("jumps", []))
        if initial.get("kind") != LAYER_PATTERN or len(jumps) < 2:
            raise ScenarioError("a separation sweep needs a layer-pattern datum with at least two jumps")
        gaps = np.diff(jumps)
        k = int(np.argmin(gaps))
        center = 0.5 * (jumps[k] + jumps[k + 1])
        jumps[k], jumps[k + 1] = center - 0.5 * float(value), center + 0.5 * float(value)
        initial["jumps"] = jumps
        initial["r"] = None
    else:
        raise ScenarioError(f"unknown sweep parameter '{parameter}'; use eps, n or separation")
    out["name"] = f"{data.get('name', 'scenario')}-{parameter}={value}"
    return out


def solver_config(scenario: Scenario, **overrides) -> SolverConfig:
    settings = {**scenario.solver, **overrides}
    settings.setdefault("snapshot_times", scenario.snapshot_times)
    settings.setdefault("t_end", scenario.t_end)
    return SolverConfig(eps=scenario.eps, model=scenario.model, potential=scenario.potential, **settings)


def _profile_potential(scenario: Scenario) -> PotentialSpec:
    name = scenario.initial.get("profile_potential")
    return scenario.potential if name is None else pot.parse_potential(name)


def build_initial(scenario: Scenario) -> Tuple[Field, LayerPattern]:
    """
    Initial field and the step pattern v it is compared against.

    For formula and piecewise data the pattern is read off the datum's zero
    crossings.
    """
    grid = scenario.grid
    initial = scenario.initial
    kind = initial["kind"]
    if kind == LAYER_PATTERN:
        pattern = profiles.make_pattern(grid.a, grid.b, initial["jumps"],
                                        initial.get("first_sign", -1), initial.get("r"))
        table = profiles.cached_profile_table(
            _profile_potential(scenario), scenario.model, scenario.eps,
            initial.get("eta", profiles.DEFAULT_ETA), initial.get("n_knots", profiles.DEFAULT_KNOTS))
        return profiles.build_layer_datum(pattern, table, grid), pattern

    if kind == FORMULA:
        func = expressions.compile_expression(initial["expression"], "x")
        u0 = Field(grid, func(grid.x), 0.0)
    else:
        breaks = np.asarray(initial["breaks"], dtype=float)
        values = np.asarray(initial["values"], dtype=float)
        x = grid.x
        u = values[np.searchsorted(breaks, x, side="right")]
        at_breaks = initial.get("at_breaks")
        if at_breaks is not None:
            on_break = np.isclose(x[:, None], breaks[None, :], rtol=0.0, atol=1e-9 * grid.h).any(axis=1)
            u = np.where(on_break, float(at_breaks), u)
        u0 = Field(grid, u, 0.0)
    return u0, pattern_from_field(u0)
