#!/usr/bin/env python3
"""
SlowLayers command line

Runs metastability scenarios for u_t = Q(eps^2 u_x)_x - F'(u) and writes
plot-ready series, snapshots and a JSON report.

Usage:
    # Run a scenario file
    python scripts/slowlayers.py run config/scenarios/template.json

    # Run a built-in experiment (optionally with a shorter horizon)
    python scripts/slowlayers.py run --builtin exp1-euclidean --t-end 30000

    # List built-ins, or print the template config
    python scripts/slowlayers.py list
    python scripts/slowlayers.py list --template

    # Sweep a parameter (eps, n or separation)
    python scripts/slowlayers.py sweep my_two_layer.json --param eps --values 0.125,0.1,0.08

Exit codes: 0 success, 1 validation, 2 solver abort, 3 partial sweep failure.
"""

import sys
import json
import argparse
from pathlib import Path

# Add src/ to path for imports
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import runner
import scenarios
from errors import ScenarioError


def _parse_values(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--values must be a comma-separated list of numbers, got '{text}'")


def cmd_run(args) -> int:
    if bool(args.config) == bool(args.builtin):
        print("❌ Give either a config file or --builtin <name>")
        return runner.EXIT_VALIDATION
    try:
        scenario = scenarios.load_builtin(args.builtin) if args.builtin else scenarios.load_scenario(args.config)
    except ScenarioError as e:
        print("❌ Scenario does not validate:")
        for problem in e.problems:
            print(f"   - {problem}")
        return runner.EXIT_VALIDATION

    output_dir = Path(args.output) if args.output else None
    outcome = runner.run_scenario(scenario, output_dir=output_dir, t_end=args.t_end,
                                  progress=not args.no_progress)
    return outcome.exit_code


def cmd_list(args) -> int:
    if args.template:
        print(json.dumps(scenarios.template(), indent=2))
        return runner.EXIT_OK
    print("\n📋 Built-in scenarios:")
    for entry in scenarios.list_scenarios():
        print(f"  {entry['name']:<20} {entry['description']}")
    print("\n  template             python scripts/slowlayers.py list --template")
    return runner.EXIT_OK


def cmd_sweep(args) -> int:
    try:
        base = scenarios.read_scenario_file(args.config)
        problems = scenarios.scenario_problems(base)
        if problems:
            raise ScenarioError(problems)
    except ScenarioError as e:
        print("❌ Base scenario does not validate:")
        for problem in e.problems:
            print(f"   - {problem}")
        return runner.EXIT_VALIDATION

    try:
        summary = runner.sweep(base, args.param, args.values,
                               output_dir=Path(args.output) if args.output else None,
                               t_end=args.t_end, n_jobs=args.jobs)
    except ScenarioError as e:
        print(f"❌ {e}")
        return runner.EXIT_VALIDATION

    fits = summary["fits"]
    for law in ("exponential", "algebraic"):
        fit = fits.get(law)
        if fit:
            print(f"   {law:<12} slope={fit['slope']:.4g}  residual={fit['residual']:.3g}")
    if summary["failures"]:
        print(f"⚠️  {summary['failures']} of {len(summary['runs'])} runs failed")
    print(f"✓ Sweep report: {summary['output_dir']}/sweep.json")
    return summary["exit_code"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Simulate and certify metastable transition layers")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one scenario")
    run.add_argument("config", nargs="?", help="Scenario JSON file")
    run.add_argument("--builtin", choices=scenarios.BUILTINS, help="Run a built-in scenario")
    run.add_argument("--t-end", type=float, help="Stop earlier than the scenario's t_end")
    run.add_argument("--output", help="Output directory (default data/output/<name>)")
    run.add_argument("--no-progress", action="store_true", help="Hide the progress bar")
    run.set_defaults(func=cmd_run)

    lst = sub.add_parser("list", help="List built-in scenarios")
    lst.add_argument("--template", action="store_true", help="Print the template scenario")
    lst.set_defaults(func=cmd_list)

    sweep = sub.add_parser("sweep", help="Sweep one parameter of a scenario")
    sweep.add_argument("config", help="Base scenario JSON file")
    sweep.add_argument("--param", required=True, choices=("eps", "n", "separation"))
    sweep.add_argument("--values", required=True, type=_parse_values, help="Comma-separated values")
    sweep.add_argument("--t-end", type=float, help="Horizon for every run")
    sweep.add_argument("--output", help="Sweep output directory")
    sweep.add_argument("--jobs", type=int, default=-1, help="Parallel runs (joblib n_jobs)")
    sweep.set_defaults(func=cmd_sweep)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
