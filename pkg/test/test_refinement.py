import csv
import json

import numpy as np
import pytest

from components.errors import ConfigurationError, PreconditionError
from components.forward import field_at, planar_sensor_grid
from components.measures import DiscreteVectorMeasure, project_onto_gsm
from components.pipeline import simulate_scenario, standard_scenario
from components.refinement import (
    TRACE_COLUMNS,
    InversionData,
    RefinementPlan,
    build_levels,
    d_lambda,
    delta,
    inequality_audit,
    kappa_probe_estimate,
    kappa_upper_bound,
    nested_spaces,
    range_projection,
    run_refinement,
    support_convergence,
)
from components.solver import SolveOptions, lambda_max, solve


@pytest.fixture
def data(region):
    sensors = planar_sensor_grid((-0.5, 1.5, -0.5, 1.5), (8, 8), 1.0)
    truth = DiscreteVectorMeasure(
        [[0.3, 0.6, -0.2], [0.7, 0.3, -0.35]], [[0.0, 0.0, 1.0], [0.5, 0.0, -0.5]], region
    )
    return InversionData(region=region, sensors=sensors, f=field_at(truth, sensors.points, sensors.direction, 1.0), scale=1.0)


@pytest.fixture
def plan():
    return RefinementPlan(base_resolution=(2, 2, 1), levels=2, lambda_ratio=0.2)


class TestRefinementPlan:

    def test_resolution_grows_by_factor(self):
        plan = RefinementPlan(base_resolution=(4, 4, 2), levels=3, factor=2)
        assert plan.resolution(2) == (16, 16, 8)

    def test_needs_a_lambda(self):
        with pytest.raises(ValueError):
            RefinementPlan(lam=None, lambda_ratio=None)

    def test_factor_must_be_at_least_two(self):
        with pytest.raises(ValueError):
            RefinementPlan(factor=1)


class TestNestedSpaces:

    def test_coarse_nodes_are_fine_nodes(self, region, plan):
        coarse, fine = nested_spaces(region, plan)
        assert coarse.num_nodes == 4
        assert fine.num_nodes == 32 + 4
        assert np.all(fine.node_index(coarse.nodes) >= 0)

    def test_odd_factor_stays_nested(self, region):
        plan = RefinementPlan(base_resolution=(1, 1, 1), levels=3, factor=3)
        spaces = nested_spaces(region, plan)
        for coarse, fine in zip(spaces, spaces[1:]):
            assert np.all(fine.node_index(coarse.nodes) >= 0)
        assert spaces[1].num_nodes <= 28

    def test_projection_of_coarse_measures_is_exact(self, rng, region, plan):
        coarse, fine = nested_spaces(region, plan)
        mu = coarse.measure(rng.normal(size=(coarse.num_nodes, 3)))
        projected = project_onto_gsm(mu, fine)
        order = np.lexsort(mu.locations.T)
        projected_order = np.lexsort(projected.locations.T)
        assert np.array_equal(projected.locations[projected_order], mu.locations[order])
        assert np.array_equal(projected.moments[projected_order], mu.moments[order])


class TestQuantities:

    def test_d_lambda_values(self):
        assert d_lambda(0.0, 3.0, 2.0, 1.0) == 0.0
        assert d_lambda(1.0, 0.0, 0.0, 1.0) == 2.0
        assert d_lambda(0.5, 1.0, 2.0, 0.1) < d_lambda(0.5, 1.0, 2.5, 0.1)

    def test_delta_is_half_lambda_max(self, data, plan):
        model = build_levels(plan, data)[0]
        assert delta(data.f, model.space, model) == pytest.approx(0.5 * lambda_max(model, data.f), rel=1e-15)
        assert delta(np.zeros_like(data.f), model.space, model) == 0.0

    def test_delta_needs_the_matching_model(self, data, plan):
        coarse, fine = build_levels(plan, data)
        with pytest.raises(ConfigurationError):
            delta(data.f, coarse.space, fine)

    def test_delta_is_bounded_by_the_fine_sup(self, rng, data, plan):
        coarse, fine = build_levels(plan, data)
        g = rng.normal(size=len(data.f))
        lo, hi = data.region.lower, data.region.upper
        axes = [np.linspace(lo[i], hi[i], 9) for i in range(3)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        points = np.vstack([grid, fine.space.nodes])
        fine_sup = float(np.max(np.linalg.norm(fine.adjoint_field_at(g, points), axis=1)))
        assert delta(g, coarse.space, coarse) <= delta(g, fine.space, fine)
        assert delta(g, fine.space, fine) <= fine_sup * (1.0 + 1e-12)

    def test_kappa_vanishes_on_nodes(self, rng, data, plan):
        model = build_levels(plan, data)[-1]
        mu = model.space.measure(rng.normal(size=(model.num_nodes, 3)))
        assert kappa_upper_bound(mu, model.space, model) == 0.0

    def test_kappa_of_single_off_node_atom(self, data, plan):
        model = build_levels(plan, data)[0]
        mu = DiscreteVectorMeasure([[0.3, 0.4, -0.1]], [[0.0, 1.0, 1.0]], data.region)
        projected = project_onto_gsm(mu, model.space)
        expected = model.norm(model.simulate(mu) - model.simulate(projected))
        assert kappa_upper_bound(mu, model.space, model) == pytest.approx(expected)

    def test_probe_estimate_bounds_unit_atoms(self, data, plan):
        model = build_levels(plan, data)[0]
        probe = np.array([[0.3, 0.4, -0.1]])
        estimate = kappa_probe_estimate(model, probe)
        for direction in np.eye(3):
            atom = DiscreteVectorMeasure(probe, [direction], data.region)
            assert kappa_upper_bound(atom, model.space, model) <= estimate * (1.0 + 1e-12)
        assert kappa_probe_estimate(model, model.space.nodes) == 0.0

    def test_range_projection_is_orthogonal(self, rng, data, plan):
        model = build_levels(plan, data)[0]
        f = rng.normal(size=len(data.f))
        projected = range_projection(model, f)
        scale = np.abs(model.adjoint_apply(f)).max()
        assert np.abs(model.adjoint_apply(f - projected)).max() <= 1e-7 * scale
        assert np.allclose(range_projection(model, projected), projected, rtol=1e-8, atol=1e-12)


class TestInequalityAudit:

    def test_missing_reference_is_a_precondition_error(self, data, plan):
        model = build_levels(plan, data)[0]
        with pytest.raises(PreconditionError):
            inequality_audit(model, model, data.f, data.f, 1.0, DiscreteVectorMeasure.empty(), None)

    def test_same_space_and_data_pass(self, data, plan, tight_options):
        model = build_levels(plan, data)[-1]
        lam = 0.2 * lambda_max(model, data.f)
        result = solve(model, data.f, lam, tight_options)
        audit = inequality_audit(model, model, data.f, data.f, lam, result.measure, result.measure)
        assert audit.fncond3_ok and audit.fncond2_ok
        assert audit.slacks["kappa"] == 0.0
        assert audit.slacks["fncond3"] == pytest.approx(0.0, abs=1e-12)

    def test_corrupted_reference_is_reported_not_raised(self, data, plan, tight_options):
        coarse, fine = build_levels(plan, data)
        lam = 0.2 * lambda_max(fine, data.f)
        result = solve(coarse, data.f, lam, tight_options)
        zeroed = DiscreteVectorMeasure.empty(data.region)
        audit = inequality_audit(coarse, fine, data.f, data.f, lam, result.measure, zeroed)
        assert isinstance(audit.fncond3_ok, bool)
        assert isinstance(audit.fncond2_ok, bool)
        assert audit.slacks["kappa"] == 0.0


class TestSupportConvergence:

    def test_empty_reference_gives_zeros(self):
        out = support_convergence([np.array([[0.0, 0.0, 0.0]])], np.zeros((0, 3)), np.zeros((0, 3)))
        assert out[0].dist_to_levelset == 0.0
        assert out[0].dist_from_ref_support == 0.0
        assert not out[0].flagged

    def test_empty_level_support_is_flagged(self):
        reference = np.array([[0.0, 0.0, 0.0]])
        out = support_convergence([np.zeros((0, 3))], reference, reference)
        assert out[0].dist_to_levelset == 0.0
        assert out[0].dist_from_ref_support == float("inf")
        assert out[0].flagged

    def test_distances(self):
        reference = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        level_set = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.0, 0.0]])
        support = np.array([[0.0, 0.2, 0.0]])
        out = support_convergence([support], reference, level_set)
        assert out[0].dist_to_levelset == pytest.approx(0.2)
        assert out[0].dist_from_ref_support == pytest.approx(np.hypot(1.0, 0.2))


class TestRunRefinement:

    def test_single_level_plan(self, data, tight_options):
        plan = RefinementPlan(base_resolution=(2, 2, 1), levels=1, lambda_ratio=0.2)
        trace = run_refinement(plan, data, tight_options)
        assert len(trace.rows) == 1
        row = trace.rows[0]
        assert row.support_hausdorff is None
        assert row.r_distance == 0.0
        assert row.kappa == 0.0
        assert row.fncond3_ok and row.fncond2_ok
        assert row.dist_to_levelset == 0.0

    def test_two_levels(self, data, plan, tight_options):
        trace = run_refinement(plan, data, tight_options)
        assert [row.level for row in trace.rows] == [1, 2]
        first, second = trace.objectives
        assert second <= first + 1e-8 * abs(first)
        assert all(row.fncond3_ok and row.fncond2_ok for row in trace.rows)
        assert trace.rows[-1].r_distance == 0.0
        assert trace.rows[-1].kappa == 0.0
        assert trace.rows[-1].dist_to_levelset == 0.0
        assert trace.rows[-1].dist_from_ref_support == 0.0
        assert trace.rows[0].covering_radius > trace.rows[1].covering_radius
        assert trace.rows[1].support_hausdorff is not None
        assert trace.lam == pytest.approx(0.2 * trace.lambda_max)

    def test_kappa_shrinks_towards_the_finest_level(self, data, tight_options):
        plan = RefinementPlan(base_resolution=(2, 2, 1), levels=3, lambda_ratio=0.2)
        trace = run_refinement(plan, data, tight_options)
        kappas = [row.kappa for row in trace.rows]
        assert kappas[-1] == 0.0
        assert kappas[0] > 0.0
        assert kappas[0] >= kappas[1] >= kappas[2]

    def test_warm_and_cold_starts_agree(self, data, plan, tight_options):
        warm = run_refinement(plan, data, tight_options)
        cold = run_refinement(plan.model_copy(update={"warm_start": False}), data, tight_options)
        for a, b in zip(warm.objectives, cold.objectives):
            assert a == pytest.approx(b, rel=1e-8)

    def test_explicit_lambda_overrides_plan(self, data, plan, tight_options):
        trace = run_refinement(plan, data, tight_options, lam=0.05)
        assert trace.lam == 0.05
        assert all(row.lam == 0.05 for row in trace.rows)

    def test_lambda_above_max_gives_empty_supports(self, data, plan):
        trace = run_refinement(plan.model_copy(update={"lambda_ratio": 2.0}), data)
        assert all(row.active_count == 0 for row in trace.rows)
        assert all(row.dist_to_levelset == 0.0 and row.dist_from_ref_support == 0.0 for row in trace.rows)

    def test_noisy_levels(self, data, plan, tight_options):
        noisy = plan.model_copy(update={"level_noise_std": 1e-3, "noise_seed": 7})
        first = run_refinement(noisy, data, tight_options)
        second = run_refinement(noisy, data, tight_options)
        assert first.objectives == second.objectives
        assert all(row.delta > 0.0 for row in first.rows)
        assert all(row.perturbation_lhs <= row.perturbation_rhs * (1.0 + 1e-9) + 1e-15 for row in first.rows)
        assert not np.array_equal(first.level_data[0], first.level_data[1])

    def test_projected_data(self, data, plan, tight_options):
        trace = run_refinement(plan.model_copy(update={"project_data": True}), data, tight_options)
        assert all(row.projection_residual is not None and row.projection_residual >= 0.0 for row in trace.rows)
        assert trace.reference is not trace.results[-1]

    def test_trace_exports(self, data, plan, tight_options, tmp_path):
        trace = run_refinement(plan, data, tight_options)
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        assert "np.float64" not in path.read_text(encoding="utf-8")
        with open(path, encoding="utf-8") as handle:
            lines = [line for line in handle if not line.startswith("#")]
        rows = list(csv.reader(lines))
        assert tuple(rows[0]) == TRACE_COLUMNS
        assert len(rows) == 3
        payload = json.loads(trace.to_json())
        assert payload["columns"] == list(TRACE_COLUMNS)
        assert len(payload["levels"]) == 2

    def test_wrong_number_of_models(self, data, plan):
        models = build_levels(plan, data)
        with pytest.raises(ConfigurationError):
            run_refinement(plan, data, models=models[:1])


@pytest.mark.slow
class TestStandardScenarioRefinement:

    def test_four_level_convergence(self):
        _, data = simulate_scenario(standard_scenario())
        plan = RefinementPlan(base_resolution=(4, 4, 2), levels=4, factor=2, lambda_ratio=0.1)
        opts = SolveOptions(certificate_tol=1e-8, objective_tol=1e-15, max_iters=20000)
        trace = run_refinement(plan, data, opts)

        objectives = trace.objectives
        for earlier, later in zip(objectives, objectives[1:]):
            assert later <= earlier + 1e-8 * abs(earlier)
        assert trace.rows[2].r_distance < trace.rows[0].r_distance
        assert trace.rows[2].dist_to_levelset < trace.rows[2].mesh_size
        assert trace.rows[2].dist_from_ref_support < trace.rows[2].mesh_size
        assert all(row.fncond3_ok and row.fncond2_ok for row in trace.rows)
