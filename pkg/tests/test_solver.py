import numpy as np
import pytest

import energy as en
import flux as fx
import potentials as pot
import profiles
import solver
from errors import ConstraintError, InvalidArgumentError, SolverAbort, StepRejected
from grid import Field, Grid1D, constant, sample


def _config(model, eps=0.1, potential=None, **kwargs):
    kwargs.setdefault("t_end", 1.0)
    return solver.SolverConfig(eps=eps, model=model, potential=potential or pot.quartic(), **kwargs)


def _two_layers(model, eps=0.1, n_cells=400, jumps=(-0.5, 0.5), a=-2.0, b=2.0):
    pattern = profiles.make_pattern(a, b, jumps, first_sign=-1)
    table = profiles.cached_profile_table(pot.quartic(), model, eps)
    return profiles.build_layer_datum(pattern, table, Grid1D(a, b, n_cells)), pattern


class TestSolverConfig:
    def test_dt_max_defaults(self, euclidean, minkowski, linear):
        assert _config(euclidean).dt_max == 10.0
        assert _config(linear).dt_max == 10.0
        assert _config(minkowski).dt_max == 1.0

    def test_problems_are_collected(self, euclidean):
        with pytest.raises(InvalidArgumentError) as info:
            _config(euclidean, dt_min=1e-2, dt_init=1e-3, newton_max_iter=0)
        assert "dt_min" in str(info.value)
        assert "newton_max_iter" in str(info.value)

    def test_snapshots_within_horizon(self, euclidean):
        with pytest.raises(InvalidArgumentError):
            _config(euclidean, t_end=1.0, snapshot_times=(0.5, 2.0))

    def test_to_dict(self, minkowski):
        data = _config(minkowski, snapshot_times=(1.0, 0.0)).to_dict()
        assert data["model"]["name"] == "minkowski"
        assert data["snapshot_times"] == [0.0, 1.0]


class TestSemidiscreteRhs:
    def test_wells_and_zero_are_equilibria(self, euclidean, exp1_grid):
        config = _config(euclidean)
        for value in (1.0, -1.0, 0.0):
            assert np.all(solver.semidiscrete_rhs(constant(exp1_grid, value), config) == 0.0)

    @pytest.mark.parametrize("model_kind", [fx.EUCLIDEAN, fx.MINKOWSKI, fx.LINEAR])
    def test_rhs_is_scaled_energy_gradient(self, quartic, model_kind):
        model = fx.FluxModel(model_kind)
        grid = Grid1D(-1.0, 1.0, 40)
        u = sample(grid, lambda x: np.sin(3 * x))
        config = _config(model, eps=0.2)
        expected = -0.2 * en.energy_gradient(u, quartic, model, 0.2) / grid.weights
        assert np.allclose(solver.semidiscrete_rhs(u, config), expected)

    def test_profile_datum_is_nearly_stationary(self, euclidean):
        coarse, _ = _two_layers(euclidean, jumps=(0.0,), n_cells=400)
        fine, _ = _two_layers(euclidean, jumps=(0.0,), n_cells=800)
        config = _config(euclidean)
        r_coarse = np.max(np.abs(solver.semidiscrete_rhs(coarse, config)))
        r_fine = np.max(np.abs(solver.semidiscrete_rhs(fine, config)))
        assert r_fine < r_coarse / 3

    def test_minkowski_wall(self, minkowski, exp1_grid):
        values = np.zeros(exp1_grid.n_nodes)
        values[5] = 1.0
        with pytest.raises(ConstraintError) as info:
            solver.semidiscrete_rhs(Field(exp1_grid, values), _config(minkowski))
        assert info.value.cell == 4


class TestStep:
    def test_well_is_fixed(self, euclidean, exp1_grid):
        state = constant(exp1_grid, 1.0)
        new, stats = solver.step(state, 1.0, _config(euclidean))
        assert np.array_equal(new.values, state.values)
        assert new.time_stamp == 1.0
        assert stats.iterations == 1

    def test_fourier_mode_decay(self, linear):
        # F = 0, Q linear: each cosine mode is damped by 1/(1 + dt eps^2 k^2)
        zero = pot.custom(lambda u: 0 * u, lambda u: 0 * u, lambda u: 0 * u, lambda u: 0 * u)
        grid = Grid1D(0.0, 1.0, 64)
        eps, dt, m = 0.1, 0.01, 3
        u = sample(grid, lambda x: 0.5 * np.cos(m * np.pi * x))
        new, _ = solver.step(u, dt, _config(linear, eps=eps, potential=zero))
        k2 = 2.0 / grid.h ** 2 * (1.0 - np.cos(m * np.pi * grid.h))
        assert np.allclose(new.values, u.values / (1.0 + dt * eps ** 2 * k2), rtol=1e-9, atol=1e-14)

    @pytest.mark.parametrize("model_kind", [fx.EUCLIDEAN, fx.MINKOWSKI])
    def test_energy_does_not_increase(self, quartic, model_kind):
        model = fx.FluxModel(model_kind)
        u0, _ = _two_layers(model)
        config = _config(model)
        new, _ = solver.step(u0, 1.0, config)
        assert en.energy(new, quartic, model, 0.1).total <= en.energy(u0, quartic, model, 0.1).total

    def test_dt_range(self, euclidean, exp1_grid):
        with pytest.raises(InvalidArgumentError):
            solver.step(constant(exp1_grid, 1.0), 11.0, _config(euclidean))

    def test_rejection_leaves_state(self, euclidean):
        u0, _ = _two_layers(euclidean)
        before = u0.values.copy()
        with pytest.raises(StepRejected):
            solver.step(u0, 1.0, _config(euclidean, newton_max_iter=1))
        assert np.array_equal(u0.values, before)


class TestEvolve:
    def test_well_stays_and_dt_grows(self, euclidean, exp1_grid):
        record = solver.evolve(constant(exp1_grid, 1.0), _config(euclidean, t_end=2000.0))
        assert record.status == "completed"
        assert np.array_equal(record.final.values, np.ones(exp1_grid.n_nodes))
        assert all(row.energy == 0.0 for row in record.series)
        assert max(row.dt for row in record.series) == 10.0
        assert record.final.time_stamp == pytest.approx(2000.0)

    def test_two_layer_run_is_dissipative(self, euclidean):
        u0, pattern = _two_layers(euclidean)
        record = solver.evolve(u0, _config(euclidean, t_end=50.0), pattern=pattern)
        energies = [row.energy for row in record.series]
        assert record.energy_monotone
        assert record.dissipation_ok
        assert all(b <= a + 1e-10 * (1 + abs(a)) for a, b in zip(energies, energies[1:]))
        assert record.layers_at(50.0) == 2
        assert np.all(np.abs(record.final.values) <= 1.0 + 1e-8)

    def test_snapshots_land_exactly(self, euclidean):
        u0, _ = _two_layers(euclidean)
        record = solver.evolve(u0, _config(euclidean, t_end=3.0, snapshot_times=(0.0, 1.5, 3.0)))
        assert sorted(record.snapshots) == [0.0, 1.5, 3.0]
        assert record.snapshots[1.5].time_stamp == 1.5
        assert record.snapshots[3.0].time_stamp == 3.0

    def test_minkowski_states_respect_the_wall(self, minkowski):
        u0, pattern = _two_layers(minkowski)
        config = _config(minkowski, t_end=20.0, snapshot_times=(5.0, 10.0, 20.0))
        record = solver.evolve(u0, config, pattern=pattern)
        for state in record.snapshots.values():
            assert np.max(0.01 * np.abs(state.face_gradients())) <= minkowski.gradient_wall

    def test_observers_are_called(self, euclidean, exp1_grid):
        seen = []
        solver.evolve(constant(exp1_grid, -1.0), _config(euclidean, t_end=1.0),
                      observers=[lambda state, row: seen.append(row.t)])
        assert seen[0] == 0.0 and seen[-1] == pytest.approx(1.0)

    def test_abort_carries_partial_record(self, euclidean, exp1_pattern, exp1_grid):
        v = profiles.sample_pattern(exp1_pattern, exp1_grid)
        config = _config(euclidean, dt_init=1e-4, dt_min=1e-4, local_error_tol=1e-14)
        with pytest.raises(SolverAbort) as info:
            solver.evolve(v, config)
        assert info.value.record.status == "aborted"
        assert np.array_equal(info.value.snapshot.values, v.values)

    def test_resume_reaches_target_time(self, euclidean):
        u0, pattern = _two_layers(euclidean)
        record = solver.evolve(u0, _config(euclidean, t_end=5.0), pattern=pattern)
        state = solver.resume(record, 0.0, u0.values, 2.0)
        assert state.time_stamp == pytest.approx(2.0)


class TestAprioriGradient:
    def test_minkowski_run_satisfies_bound(self, minkowski):
        u0, pattern = _two_layers(minkowski)
        record = solver.evolve(u0, _config(minkowski, t_end=20.0, snapshot_times=(10.0,)), pattern=pattern)
        assert solver.apriori_gradient_check(record, 0.1)
        assert solver.apriori_gradient_report(record)["passed"]

    def test_sawtooth_violates_bound(self, minkowski):
        u0, pattern = _two_layers(minkowski)
        record = solver.RunRecord(config=_config(minkowski), initial=u0, pattern=pattern)
        period, slope = 0.2, 20.0
        x = u0.x
        tri = 1.0 - 4.0 * np.abs(((x - x[0]) / period) % 1.0 - 0.5)
        record.snapshots[1.0] = Field(u0.grid, slope * period / 4.0 * tri, 1.0)
        assert not solver.apriori_gradient_check(record)

    def test_minkowski_only(self, euclidean, exp1_grid):
        record = solver.RunRecord(config=_config(euclidean), initial=constant(exp1_grid, 1.0))
        with pytest.raises(InvalidArgumentError):
            solver.apriori_gradient_check(record)

    def test_eps_must_match(self, minkowski, exp1_grid):
        record = solver.RunRecord(config=_config(minkowski), initial=constant(exp1_grid, 1.0))
        with pytest.raises(InvalidArgumentError):
            solver.apriori_gradient_check(record, eps=0.2)
