"""
Long reproductions of the built-in experiments (pytest --runslow).

Event times are checked to order of magnitude and event order; the
property checks that need no reference numbers live in the unit tests.
"""

import copy

import numpy as np
import pytest

import runner
import scenarios
import solver

pytestmark = pytest.mark.slow

SQRT_LAMBDA = np.sqrt(2.0)


def _run(name, tmp_path_factory):
    out = tmp_path_factory.mktemp(name)
    outcome = runner.run_scenario(scenarios.load_builtin(name), output_dir=out, progress=False, quiet=True)
    assert outcome.exit_code == runner.EXIT_OK
    return outcome


def _events(outcome):
    return outcome.report["diagnostics"]["collapse_events"]


def _check_run_properties(outcome):
    record = outcome.record
    assert record.energy_monotone
    assert record.dissipation_ok
    if record.config.model.is_minkowski:
        assert solver.apriori_gradient_check(record)


@pytest.fixture(scope="module")
def exp1_euclidean(tmp_path_factory):
    return _run("exp1-euclidean", tmp_path_factory)


@pytest.fixture(scope="module")
def exp3_euclidean(tmp_path_factory):
    return _run("exp3-euclidean-n2", tmp_path_factory)


class TestExperimentOne:
    def test_six_layers_persist_then_outer_pair_collapses(self, exp1_euclidean):
        record = exp1_euclidean.record
        assert record.layers_at(2e4) == 6
        first = _events(exp1_euclidean)[0]
        assert 1e4 <= first["t_event"] <= 1e5
        assert (first["layers_before"], first["layers_after"]) == (6, 4)
        assert first["vanished_pair"] == pytest.approx([2.2, 3.2], abs=0.3)
        assert 1.9 <= first["collapse_site"][0] <= first["collapse_site"][1] <= 3.5

    def test_three_layers_at_one_million(self, exp1_euclidean):
        record = exp1_euclidean.record
        assert record.layers_at(1e6) == 3
        assert all(e["t_event"] <= 3 * 5e5 for e in _events(exp1_euclidean))
        _check_run_properties(exp1_euclidean)

    def test_minkowski_ends_with_one_layer(self, tmp_path_factory):
        outcome = _run("exp1-minkowski", tmp_path_factory)
        record = outcome.record
        assert record.layers_at(1e6 / 3) > 1
        assert record.series[-1].n_layers == 1
        times = [e["t_event"] for e in _events(outcome)]
        assert times == sorted(times)
        _check_run_properties(outcome)


class TestExperimentTwo:
    def test_discontinuous_datum_settles_then_collapses(self, tmp_path_factory):
        outcome = _run("exp2-euclidean", tmp_path_factory)
        record = outcome.record
        assert record.layers_at(6.0) == 2
        assert record.layers_at(2e4) == 2
        assert record.series[-1].n_layers == 0
        assert np.max(np.abs(record.final.values - 1.0)) <= 1e-6
        _check_run_properties(outcome)

    def test_minkowski_formula_datum(self, tmp_path_factory):
        outcome = _run("exp2-minkowski", tmp_path_factory)
        record = outcome.record
        formed = next(row for row in record.series if row.t >= 10.0)
        assert list(formed.interfaces) == pytest.approx([-2.5, -0.5, 1.5, 3.5], abs=0.1)
        assert record.layers_at(1e4) == 4
        assert record.layers_at(1e5) < 4
        _check_run_properties(outcome)


def _two_layer_base(model, potential="quartic", profile_potential=None):
    data = scenarios.template()
    data["model"] = model
    data["potential"] = potential
    data["t_end"] = 5e8
    data["snapshot_times"] = [0]
    data["solver"] = {"dt_max": 1e4}
    data["diagnostics"]["certificates"] = False
    if profile_potential:
        data["initial"]["profile_potential"] = profile_potential
    return data


class TestExponentialLaw:
    @pytest.mark.parametrize("model", ["linear", "euclidean"])
    def test_slope_matches_separation(self, model, tmp_path):
        summary = runner.sweep(_two_layer_base(model), "eps", [0.125, 0.1, 0.08], output_dir=tmp_path)
        assert summary["failures"] == 0
        assert all(run["first_collapse"] is not None for run in summary["runs"])
        slope = summary["fits"]["exponential"]["slope"]
        assert summary["reference_slopes"]["separation"] == pytest.approx(1.0)
        # two layers at distance d interact through tails exp(-sqrt(lambda) d / eps)
        assert slope == pytest.approx(SQRT_LAMBDA * 1.0, rel=0.3)


class TestDegenerateContrast:
    def test_fast_first_collapse(self, exp1_euclidean, exp3_euclidean):
        first = _events(exp3_euclidean)[0]["t_event"]
        assert first < 1e3
        assert first <= _events(exp1_euclidean)[0]["t_event"] / 20
        _check_run_properties(exp3_euclidean)

    def test_algebraic_law_fits_better(self, tmp_path):
        base = _two_layer_base("euclidean", "degenerate:n=2", profile_potential="quartic")
        base["t_end"] = 1e6
        base["solver"] = {"dt_max": 100}
        summary = runner.sweep(base, "eps", [0.2, 0.1, 0.05], output_dir=tmp_path)
        fits = summary["fits"]
        assert fits["points"] == 3
        assert fits["algebraic"]["residual"] <= fits["exponential"]["residual"]


class TestMinkowskiDegenerate:
    def test_gradient_bound_on_snapshots(self, tmp_path_factory):
        outcome = _run("exp3-minkowski-n3", tmp_path_factory)
        _check_run_properties(outcome)


def test_sweep_base_is_left_untouched():
    base = _two_layer_base("linear")
    before = copy.deepcopy(base)
    scenarios.with_override(base, "eps", 0.1)
    assert base == before
