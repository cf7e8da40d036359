import numpy as np
import pytest

import energy as en
import flux as fx
import profiles
from errors import ConditionError, DomainError, HypothesisNotMet, InvalidArgumentError
from grid import Field, Grid1D, constant, sample

C0_QUARTIC = 2 * np.sqrt(2) / 3


@pytest.fixture
def fine_exp1(exp1_pattern, euclidean_table):
    grid = Grid1D(-4.0, 4.0, 4000)
    return profiles.build_layer_datum(exp1_pattern, euclidean_table, grid)


class TestDiscreteEnergy:
    def test_wells_have_zero_energy(self, quartic, euclidean, exp1_grid):
        report = en.energy(constant(exp1_grid, 1.0), quartic, euclidean, 0.1)
        assert report.total == 0.0
        assert report.gradient_part == 0.0 and report.potential_part == 0.0

    def test_parts_add_up(self, quartic, minkowski, exp1_grid):
        u = sample(exp1_grid, lambda x: 0.5 * np.sin(x))
        report = en.energy(u, quartic, minkowski, 0.1)
        assert report.total == pytest.approx(report.gradient_part + report.potential_part)

    def test_per_window_split(self, quartic, euclidean, exp1_pattern, exp1_grid, euclidean_table):
        u0 = profiles.build_layer_datum(exp1_pattern, euclidean_table, exp1_grid)
        report = en.energy(u0, quartic, euclidean, 0.1, pattern=exp1_pattern)
        assert len(report.per_layer_window) == 6
        assert sum(e for _, e in report.per_layer_window) == pytest.approx(report.total)
        c_eps = en.transition_costs(quartic, 0.1).c_eps
        for _, window_energy in report.per_layer_window:
            assert window_energy == pytest.approx(c_eps, rel=1e-2)

    @pytest.mark.parametrize("model_kind", [fx.EUCLIDEAN, fx.MINKOWSKI, fx.LINEAR])
    def test_gradient_matches_finite_differences(self, quartic, model_kind):
        model = fx.FluxModel(model_kind)
        grid = Grid1D(-1.0, 1.0, 16)
        rng = np.random.default_rng(7)
        u = sample(grid, lambda x: np.tanh(2 * x) + 0.01 * rng.standard_normal(x.size))
        direction = rng.standard_normal(grid.n_nodes)
        t = 1e-6
        plus = en.energy(u.with_values(u.values + t * direction, 0.0), quartic, model, 0.5).total
        minus = en.energy(u.with_values(u.values - t * direction, 0.0), quartic, model, 0.5).total
        grad = en.energy_gradient(u, quartic, model, 0.5)
        assert grad @ direction == pytest.approx((plus - minus) / (2 * t), rel=1e-6)

    def test_minkowski_domain(self, quartic, minkowski, exp1_grid, exp1_pattern):
        v = profiles.sample_pattern(exp1_pattern, exp1_grid)
        with pytest.raises(DomainError) as info:
            en.energy(v, quartic, minkowski, 0.1)
        assert info.value.cell is not None

    def test_norms(self):
        grid = Grid1D(0.0, 2.0, 8)
        assert en.discrete_l2_norm_sq(grid, np.ones(9)) == pytest.approx(2.0)
        assert en.gradient_l2_norm_sq(sample(grid, lambda x: 3 * x)) == pytest.approx(18.0)


class TestTransitionCosts:
    def test_c0_quartic(self, quartic):
        assert en.transition_costs(quartic, 0.1).c0 == pytest.approx(C0_QUARTIC, rel=1e-9)

    @pytest.mark.parametrize("eps", [0.5, 0.1, 0.01])
    def test_ordering(self, quartic, eps):
        costs = en.transition_costs(quartic, eps)
        assert costs.c_eps < costs.c0 < costs.gamma_eps

    def test_close_to_c0(self, quartic):
        costs = en.transition_costs(quartic, 0.1)
        assert abs(costs.c_eps - costs.c0) <= 1e-2 * costs.c0
        assert abs(costs.gamma_eps - costs.c0) <= 1e-2 * costs.c0

    def test_monotone_quadratic_approach(self, quartic):
        gaps = [C0_QUARTIC - en.transition_costs(quartic, e).c_eps for e in (0.2, 0.1, 0.05)]
        assert gaps[0] > gaps[1] > gaps[2] > 0
        assert gaps[2] / gaps[1] == pytest.approx(0.25, abs=0.02)
        excess = [en.transition_costs(quartic, e).gamma_eps - C0_QUARTIC for e in (0.2, 0.1, 0.05)]
        assert excess[0] > excess[1] > excess[2] > 0

    def test_for_model(self, quartic, euclidean, minkowski, linear):
        costs = en.transition_costs(quartic, 0.1)
        assert costs.for_model(euclidean) == costs.c_eps
        assert costs.for_model(minkowski) == costs.gamma_eps
        assert costs.for_model(linear) == costs.c0

    def test_condition(self, quartic):
        with pytest.raises(ConditionError):
            en.transition_costs(quartic, 3.0)


class TestYoungMargins:
    @pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
    def test_nonnegative_on_random_samples(self, eps):
        rng = np.random.default_rng(42)
        n = 100_000
        cases = {
            fx.EUCLIDEAN: (rng.uniform(-50, 50, n) / eps ** 2, rng.uniform(0, 2 / eps ** 2, n)),
            fx.MINKOWSKI: (rng.uniform(-1, 1, n) / eps ** 2, rng.uniform(0, 10 / eps ** 2, n)),
            fx.LINEAR: (rng.uniform(-50, 50, n) / eps ** 2, rng.uniform(0, 10 / eps ** 2, n)),
        }
        for kind, (x, y) in cases.items():
            margin = en.young_type_margin(fx.FluxModel(kind), eps, x, y)
            slack = 1e-12 * (1.0 + y / eps + eps * x * x)
            assert np.all(margin >= -slack), kind

    def test_zero_at_origin(self, euclidean):
        assert en.young_type_margin(euclidean, 0.1, 0.0, 0.0) == 0.0

    def test_equality_curve(self, euclidean, minkowski):
        # equality where eps u' equals the standing-wave slope for F = y
        eps, y = 0.1, 0.2
        x = fx.profile_slope(euclidean, eps, y) / eps
        assert en.young_type_margin(euclidean, eps, x, y) == pytest.approx(0.0, abs=1e-10)
        x = fx.profile_slope(minkowski, eps, y) / eps
        assert en.young_type_margin(minkowski, eps, x, y) == pytest.approx(0.0, abs=1e-10)

    def test_domains(self, euclidean, minkowski):
        with pytest.raises(InvalidArgumentError):
            en.young_type_margin(euclidean, 0.1, 1.0, 201.0)
        with pytest.raises(InvalidArgumentError):
            en.young_type_margin(minkowski, 0.1, 101.0, 1.0)
        with pytest.raises(InvalidArgumentError):
            en.young_type_margin(minkowski, 0.1, 1.0, -1.0)


class TestEnergyBounds:
    def test_datum_energy_below_n_costs(self, quartic, euclidean, exp1_pattern, exp1_grid, euclidean_table):
        u0 = profiles.build_layer_datum(exp1_pattern, euclidean_table, exp1_grid)
        total = en.energy(u0, quartic, euclidean, 0.1).total
        assert total <= 6 * en.transition_costs(quartic, 0.1).c_eps

    def test_lower_bound_margin_on_fine_grid(self, quartic, euclidean, exp1_pattern, fine_exp1):
        margin = en.lower_bound_check(fine_exp1, exp1_pattern, quartic, euclidean, 0.1)
        assert 0.0 <= margin <= np.exp(-0.9 / 0.1)

    def test_lower_bound_after_perturbation(self, quartic, euclidean, exp1_pattern, fine_exp1):
        x = fine_exp1.x
        bump = np.where(np.abs(x + 2.7) < 0.2, np.cos(np.pi * (x + 2.7) / 0.4) ** 2, 0.0)
        perturbed = fine_exp1.with_values(fine_exp1.values - 1e-3 * exp1_pattern.v(x) * bump, 0.0)
        margin = en.lower_bound_check(perturbed, exp1_pattern, quartic, euclidean, 0.1)
        assert margin >= 0.0

    def test_hypothesis_not_met(self, quartic, euclidean, exp1_pattern, exp1_grid):
        with pytest.raises(HypothesisNotMet) as info:
            en.lower_bound_check(constant(exp1_grid, 1.0), exp1_pattern, quartic, euclidean, 0.1)
        assert info.value.distance > info.value.delta

    @pytest.mark.parametrize("model_kind", [fx.EUCLIDEAN, fx.MINKOWSKI])
    def test_monotone_fields_cost_at_least_one_transition(self, quartic, model_kind):
        model = fx.FluxModel(model_kind)
        grid = Grid1D(-2.0, 2.0, 400)
        cost = en.transition_costs(quartic, 0.1).for_model(model)
        rng = np.random.default_rng(3)
        for _ in range(20):
            steps = rng.random(grid.n_cells) + 0.1
            u = np.concatenate([[0.0], np.cumsum(steps)])
            u = -1.0 + 2.0 * u / u[-1]
            total = en.energy(Field(grid, u, 0.0), quartic, model, 0.1).total
            assert total >= cost


class TestCertificates:
    def test_datum_passes(self, quartic, euclidean, exp1_pattern, exp1_grid, euclidean_table):
        u0 = profiles.build_layer_datum(exp1_pattern, euclidean_table, exp1_grid)
        cert = en.layer_structure_certificate(u0, exp1_pattern, quartic, euclidean, 0.1)
        assert cert.passed
        assert cert.measurements["energy_excess"] <= 0.0
        assert cert.measurements["A"] == pytest.approx(0.9)
        assert cert.measurements["A_admissible"]
        assert cert.measurements["l1_to_pattern"] < en.default_closeness(exp1_pattern, 0.1)

    def test_sharp_steps_fail(self, quartic, euclidean, exp1_pattern, exp1_grid):
        v = profiles.sample_pattern(exp1_pattern, exp1_grid)
        cert = en.layer_structure_certificate(v, exp1_pattern, quartic, euclidean, 0.1)
        assert not cert.passed
        assert cert.measurements["energy_excess"] > 1.0

    def test_constant_with_empty_pattern(self, quartic, euclidean, exp1_grid):
        pattern = profiles.make_pattern(-4.0, 4.0, (), first_sign=1)
        cert = en.layer_structure_certificate(constant(exp1_grid, 1.0), pattern, quartic, euclidean, 0.1)
        assert cert.passed
        assert cert.measurements["energy_excess"] == 0.0

    def test_inadmissible_rate_is_noted(self, quartic, euclidean, exp1_pattern, exp1_grid, euclidean_table):
        u0 = profiles.build_layer_datum(exp1_pattern, euclidean_table, exp1_grid)
        cert = en.layer_structure_certificate(u0, exp1_pattern, quartic, euclidean, 0.1, A=2.0)
        assert not cert.measurements["A_admissible"]
        assert cert.notes
        assert cert.to_dict()["name"] == "layer_structure"

    def test_defaults(self, quartic, exp1_pattern):
        assert en.default_rate(exp1_pattern, quartic) == pytest.approx(0.9)
        assert en.default_closeness(exp1_pattern, 0.1) == pytest.approx(6 * (0.05 + 0.25))
