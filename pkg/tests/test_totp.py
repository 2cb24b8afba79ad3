import numpy as np
import pytest

from grasp_totp.config.settings import Settings
from grasp_totp.core.dynamics import KinematicChain, ObjectModel, PathSpec, RevoluteJoint
from grasp_totp.core.gripper import build_gripper
from grasp_totp.core.lp_solver import LpStatus, solve_lp
from grasp_totp.core.totp import (
    KinematicLimits,
    PredictionLabel,
    SequentialLpSolver,
    TotpProblem,
    assemble_constraints,
    check_trajectory,
    classify_prediction,
    first_order_rows,
    initial_nominal,
    linearized_cost,
    max_load_search,
    prediction_metrics,
    reconstruct_timestamps,
    second_order_rows,
    solve_totp,
    third_order_rows,
    time_extension,
    to_linear_program,
    travel_time,
)
from grasp_totp.exceptions import ConfigError, DimensionMismatch, StaticallyInfeasible
from grasp_totp.services.document_loader import DocumentLoader

from .conftest import FRICTION, PAD_RADIUS, SIX_CUP_POSITIONS, SUCTION_FORCE

SWEEP_LIMITS = KinematicLimits(vel_max=[3.0, 3.5], acc_max=[12.0, 15.0])
# 6 cups x 118.6 N pulling against gravity
STATIC_MAX_LOAD_KG = 6 * SUCTION_FORCE / 9.8


def single_joint_problem(acc_max, n_knots, lp_method="highs"):
    chain = KinematicChain((RevoluteJoint([0.0, 0.0, 1.0]),))
    return TotpProblem(
        path=PathSpec(np.array([[0.0], [1.0]])),
        chain=chain,
        object=None,
        gripper=None,
        limits=KinematicLimits(acc_max=[acc_max]),
        n_knots=n_knots,
        grasp_constraints_enabled=False,
        lp_method=lp_method,
    )


def sweep_problem(chain, path, obj, gripper, **options):
    options.setdefault("n_knots", 20)
    options.setdefault("lp_method", "highs")
    return TotpProblem(path, chain, obj, gripper, SWEEP_LIMITS, **options)


def scenario_problem(name, **overrides):
    scenario = DocumentLoader().load_scenario(f"preset:{name}")
    options = {**scenario.solver_overrides, **overrides}
    return TotpProblem.from_settings(scenario.path, scenario.chain, scenario.object, scenario.gripper,
                                     scenario.limits, Settings(), **options)


class RecordingSolver(SequentialLpSolver):
    """Keeps every trust-region step for inspection"""

    def __init__(self, problem):
        super().__init__(problem)
        self.steps = []

    def step(self, stack, x_bar, rho):
        x_new = super().step(stack, x_bar, rho)
        self.steps.append((stack, x_bar.copy(), rho, x_new))
        return x_new


def test_bang_bang_time():
    solution = solve_totp(single_joint_problem(2.0, 1000))
    assert solution.converged
    assert solution.total_time == pytest.approx(np.sqrt(2.0), rel=0.01)
    assert solution.timestamps[0] == 0.0
    assert np.all(np.diff(solution.timestamps) > 0.0)


def test_initial_nominal_is_bang_bang():
    problem = single_joint_problem(2.0, 200)
    x = initial_nominal(problem)
    assert x[0] == x[-1] == 0.0
    # s_dot^2 = 2 a s on the way up, symmetric on the way down
    np.testing.assert_allclose(x[:101], 4.0 * problem.grid[:101], atol=1e-9)
    np.testing.assert_allclose(x, x[::-1], atol=1e-9)


def test_zero_acceleration_limit_does_not_converge():
    solution = solve_totp(single_joint_problem(0.0, 20))
    assert not solution.converged


def test_kinematic_row_labels():
    problem = single_joint_problem(2.0, 4)
    labels = [str(label) for label in assemble_constraints(problem, np.zeros(5)).labels]
    assert "acceleration[joint=0,row=0]" in labels
    assert "acceleration[joint=0,row=1]" in labels


def test_jerk_rows_are_added_when_limited():
    problem = single_joint_problem(2.0, 4)
    problem.limits = KinematicLimits(acc_max=[2.0], jerk_max=[10.0])
    labels = {str(label) for label in assemble_constraints(problem, np.full(5, 0.5)).labels}
    assert "jerk[joint=0,row=0]" in labels


def test_velocity_row_bounds_squared_speed():
    path = PathSpec(np.array([[0.0], [2.0]]))
    block = first_order_rows(path, KinematicLimits(vel_max=[1.0]), np.linspace(0.0, 1.0, 5), 2)
    assert block.coef[0, 0] == pytest.approx(4.0)
    assert block.rhs[0] / block.coef[0, 0] == pytest.approx(0.25)


def test_velocity_row_matches_joint_speed(sweep_path, rng):
    grid = np.linspace(0.0, 1.0, 11)
    limits = KinematicLimits(vel_max=[3.0, 3.5])
    for _ in range(50):
        k = int(rng.integers(0, 11))
        x = np.zeros(11)
        x[k] = rng.uniform(0.0, 10.0)
        block = first_order_rows(sweep_path, limits, grid, k)
        joint_speed = np.abs(sweep_path.dq(grid[k]) * np.sqrt(x[k]))
        np.testing.assert_array_equal(block.evaluate(x) <= block.rhs, joint_speed <= limits.vel_max)


def test_acceleration_row_bounds_speed_increase():
    path = PathSpec(np.array([[0.0], [1.0]]))
    grid = np.linspace(0.0, 1.0, 101)
    block = second_order_rows(path, KinematicLimits(acc_max=[2.0]), grid, 10)
    np.testing.assert_allclose(block.coef[0], [-50.0, 50.0], atol=1e-9)
    x = np.zeros(101)
    x[11] = 0.04
    assert block.evaluate(x)[0] == pytest.approx(2.0)
    x[11] = 0.05
    assert block.evaluate(x)[0] > block.rhs[0]
    # braking by the same amount hits the mirrored row
    x[10], x[11] = 0.04, 0.0
    assert block.evaluate(x)[1] == pytest.approx(2.0)


def test_acceleration_rows_match_joint_acceleration(sweep_path, rng):
    grid = np.linspace(0.0, 1.0, 9)
    limits = KinematicLimits(acc_max=[12.0, 15.0])
    for _ in range(20):
        k = int(rng.integers(0, 8))
        x = rng.uniform(0.0, 5.0, size=9)
        block = second_order_rows(sweep_path, limits, grid, k)
        sddot = (x[k + 1] - x[k]) / (2.0 * (grid[k + 1] - grid[k]))
        direct = sweep_path.ddq(grid[k]) * x[k] + sweep_path.dq(grid[k]) * sddot
        np.testing.assert_allclose(block.evaluate(x), np.concatenate([direct, -direct]), atol=1e-12)


def test_jerk_rows_match_difference_of_path_accelerations(rng):
    path = PathSpec(np.array([0.0, 0.8, -0.3, 0.5]))
    grid = np.linspace(0.0, 1.0, 11)
    limits = KinematicLimits(jerk_max=[5.0])
    for k in (0, 3, 8):
        x = rng.uniform(0.5, 3.0, size=11)
        block = third_order_rows(path, limits, grid, k, x)
        d0, d1 = grid[k + 1] - grid[k], grid[k + 2] - grid[k + 1]
        sdot = np.sqrt(x[k])
        sddot0 = (x[k + 1] - x[k]) / (2.0 * d0)
        sddot1 = (x[k + 2] - x[k + 1]) / (2.0 * d1)
        cell_time = 2.0 * d0 / (np.sqrt(x[k]) + np.sqrt(x[k + 1]))
        jerk = (path.dddq(grid[k]) * sdot ** 3 + 3.0 * path.ddq(grid[k]) * sdot * sddot0
                + path.dq(grid[k]) * (sddot1 - sddot0) / cell_time)
        np.testing.assert_allclose(block.evaluate(x), np.concatenate([jerk, -jerk]), rtol=1e-10, atol=1e-10)


def test_jerk_rows_approach_continuous_jerk():
    # q = 2 s with x(s) = 1 + 0.5 sin(2 pi s): jerk = q' sdot x'' / 2
    path = PathSpec(np.array([[0.0], [2.0]]))
    grid = np.linspace(0.0, 1.0, 1001)
    x = 1.0 + 0.5 * np.sin(2.0 * np.pi * grid)
    k = 250
    block = third_order_rows(path, KinematicLimits(jerk_max=[5.0]), grid, k, x)
    x_second = -0.5 * (2.0 * np.pi) ** 2 * np.sin(2.0 * np.pi * grid[k])
    expected = np.sqrt(x[k]) * x_second
    assert block.evaluate(x)[0] == pytest.approx(expected, rel=2e-2)


def test_jerk_rows_vanish_at_constant_speed_on_a_line():
    path = PathSpec(np.array([[0.0], [1.0]]))
    grid = np.linspace(0.0, 1.0, 6)
    x = np.full(6, 1.5)
    block = third_order_rows(path, KinematicLimits(jerk_max=[5.0]), grid, 2, x)
    np.testing.assert_allclose(block.evaluate(x), 0.0, atol=1e-9)
    np.testing.assert_allclose(block.rhs, 5.0)


def test_grasp_constraints_never_speed_up(top_down_chain, sweep_path, six_cup):
    heavy = ObjectModel.from_box(40.0, [0.3, 0.2, 0.1], [0.0, 0.0, 0.05])
    free = solve_totp(sweep_problem(top_down_chain, sweep_path, heavy, six_cup, grasp_constraints_enabled=False))
    problem = sweep_problem(top_down_chain, sweep_path, heavy, six_cup)
    grasped = solve_totp(problem)

    assert free.converged
    assert grasped.total_time >= free.total_time * (1.0 - 1e-6)
    assert time_extension(free.total_time, grasped.total_time) >= -1e-4
    check = check_trajectory(problem, grasped.x)
    assert check.feasible
    assert check.min_margin == pytest.approx(grasped.min_margin)


@pytest.mark.parametrize("name", [
    "bang_bang",
    "top_down_light",
    "top_down_heavy",
    "sideways_light",
    "sideways_heavy",
    "tilted_light",
    "tilted_heavy",
])
def test_shipped_scenarios_converge(name):
    problem = scenario_problem(name)
    solution = solve_totp(problem)
    assert solution.converged
    assert solution.iterations <= problem.max_iters
    assert check_trajectory(problem, solution.x).feasible


def test_heavy_sideways_grasp_slows_the_motion():
    free = solve_totp(scenario_problem("sideways_heavy", grasp_constraints_enabled=False))
    problem = scenario_problem("sideways_heavy")
    grasped = solve_totp(problem)
    assert free.converged and grasped.converged
    assert time_extension(free.total_time, grasped.total_time) > 0.0

    stack = assemble_constraints(problem, grasped.x)
    margins = stack.margins(grasped.x)
    binding = [str(label) for label, margin in zip(stack.labels, margins) if margin <= 1e-4]
    assert any(label.startswith(("suction-loss", "slippage")) for label in binding)


def test_light_object_does_not_change_the_plan(top_down_chain, sweep_path, six_cup):
    feather = ObjectModel.from_box(0.05, [0.3, 0.2, 0.1], [0.0, 0.0, 0.05])
    free = solve_totp(sweep_problem(top_down_chain, sweep_path, feather, six_cup, grasp_constraints_enabled=False))
    grasped = solve_totp(sweep_problem(top_down_chain, sweep_path, feather, six_cup))
    assert grasped.converged
    assert grasped.total_time == pytest.approx(free.total_time, rel=1e-3)


def test_doubling_knots_barely_changes_time(top_down_chain, sweep_path):
    coarse = solve_totp(sweep_problem(top_down_chain, sweep_path, None, None, n_knots=200,
                                      grasp_constraints_enabled=False))
    fine = solve_totp(sweep_problem(top_down_chain, sweep_path, None, None, n_knots=400,
                                    grasp_constraints_enabled=False))
    assert coarse.converged and fine.converged
    assert fine.total_time == pytest.approx(coarse.total_time, rel=5e-3)


def test_eliminated_boundary_matches_pinned_equalities(top_down_chain, sweep_path, box_object, six_cup):
    problem = sweep_problem(top_down_chain, sweep_path, box_object, six_cup, n_knots=12)
    x_bar = initial_nominal(problem)
    stack = assemble_constraints(problem, x_bar)
    cost = linearized_cost(x_bar, problem.grid)
    lower = np.zeros(13)
    upper = 2.0 * x_bar
    upper[0] = upper[-1] = 0.0

    eliminated = to_linear_program(stack, cost, lower, upper)
    pinned = to_linear_program(stack, cost, lower, upper, eliminate_boundary=False)
    reduced = solve_lp(eliminated.lp, method="highs")
    full = solve_lp(pinned.lp, method="highs")
    assert reduced.status == full.status == LpStatus.OPTIMAL
    assert reduced.objective_value == pytest.approx(full.objective_value, rel=1e-7)

    x = eliminated.expand(reduced.x, 13)
    assert x[0] == x[-1] == 0.0
    assert stack.margins(x).min() >= -1e-6
    assert abs(full.x[0]) <= 1e-9 and abs(full.x[-1]) <= 1e-9


def test_iterates_stay_inside_trust_box(top_down_chain, sweep_path, six_cup):
    heavy = ObjectModel.from_box(40.0, [0.3, 0.2, 0.1], [0.0, 0.0, 0.05])
    problem = sweep_problem(top_down_chain, sweep_path, heavy, six_cup)
    solver = RecordingSolver(problem)
    solution = solver.solve()
    assert solution.converged
    assert solver.steps

    for stack, x_bar, rho, x_new in solver.steps:
        radius = rho * np.maximum(x_bar, problem.x_floor)
        slack = 1e-7 * (1.0 + np.abs(x_bar))
        assert np.all(x_new <= x_bar + radius + slack)
        if solver.restorations == 0:
            assert np.all(x_new >= x_bar - radius - slack)
        assert x_new[0] == x_new[-1] == 0.0
        # each step solves the LP built at its own nominal
        assert np.all(stack.margins(x_new) >= -1e-6 * (1.0 + np.abs(stack.rhs)))


def test_statically_infeasible_grasp(sideways_chain, sweep_path, box_object):
    no_suction = build_gripper(SIX_CUP_POSITIONS, PAD_RADIUS, 0.0, FRICTION)
    with pytest.raises(StaticallyInfeasible) as excinfo:
        solve_totp(sweep_problem(sideways_chain, sweep_path, box_object, no_suction))
    assert excinfo.value.knot == 0
    assert excinfo.value.exit_code == 4


def test_max_load_at_rest(top_down_chain, sweep_path, box_object, six_cup):
    problem = sweep_problem(top_down_chain, sweep_path, box_object, six_cup, n_knots=8)
    result = max_load_search(problem, np.zeros(9))
    assert result.max_load_kg == pytest.approx(STATIC_MAX_LOAD_KG, abs=2e-3)
    assert result.max_load_kg <= STATIC_MAX_LOAD_KG
    assert result.active_row_label


def test_motion_lowers_max_load(top_down_chain, sweep_path, box_object, six_cup):
    problem = sweep_problem(top_down_chain, sweep_path, box_object, six_cup, n_knots=8)
    moving = np.concatenate([[0.0], np.full(7, 0.5), [0.0]])
    result = max_load_search(problem, moving)
    assert result.max_load_kg < STATIC_MAX_LOAD_KG - 0.1


def test_faster_motion_lowers_max_load(top_down_chain, sweep_path, box_object, six_cup):
    problem = sweep_problem(top_down_chain, sweep_path, box_object, six_cup, n_knots=8)
    moving = np.concatenate([[0.0], np.full(7, 0.5), [0.0]])
    rest = max_load_search(problem, np.zeros(9)).max_load_kg
    slow = max_load_search(problem, moving).max_load_kg
    # x = s_dot^2, so four times x is twice the speed
    fast = max_load_search(problem, 4.0 * moving).max_load_kg
    assert fast <= slow <= rest
    assert fast < slow


def test_max_load_along_a_planned_trajectory(top_down_chain, sweep_path, box_object, six_cup):
    problem = sweep_problem(top_down_chain, sweep_path, box_object, six_cup, grasp_constraints_enabled=False)
    solution = solve_totp(problem)
    moving = max_load_search(problem, solution.x).max_load_kg
    assert 0.0 < moving < STATIC_MAX_LOAD_KG


def test_sideways_grasp_at_rest_is_limited_by_slippage(sideways_chain, sweep_path, box_object, six_cup):
    problem = sweep_problem(sideways_chain, sweep_path, box_object, six_cup, n_knots=8)
    result = max_load_search(problem, np.zeros(9))
    assert result.active_row_label.startswith("slippage")
    assert result.max_load_kg < STATIC_MAX_LOAD_KG


def test_max_load_of_unholdable_grasp(top_down_chain, sweep_path, box_object):
    no_suction = build_gripper(SIX_CUP_POSITIONS, PAD_RADIUS, 0.0, FRICTION)
    problem = sweep_problem(top_down_chain, sweep_path, box_object, no_suction, n_knots=4)
    assert max_load_search(problem, np.zeros(5)).max_load_kg == 0.0


def test_max_load_rejects_wrong_length(top_down_chain, sweep_path, box_object, six_cup):
    problem = sweep_problem(top_down_chain, sweep_path, box_object, six_cup, n_knots=4)
    with pytest.raises(DimensionMismatch):
        max_load_search(problem, np.zeros(3))
    with pytest.raises(DimensionMismatch):
        check_trajectory(problem, np.zeros(3))


def test_grasp_constraints_need_gripper_and_object(top_down_chain, sweep_path, box_object):
    with pytest.raises(ConfigError):
        sweep_problem(top_down_chain, sweep_path, box_object, None)
    with pytest.raises(ConfigError):
        sweep_problem(top_down_chain, sweep_path, box_object, None, n_knots=1, grasp_constraints_enabled=False)


def test_travel_time_and_timestamps():
    grid = np.linspace(0.0, 1.0, 5)
    x = np.ones(5)
    assert travel_time(x, grid) == pytest.approx(1.0)
    np.testing.assert_allclose(reconstruct_timestamps(x, grid), [0.0, 0.25, 0.5, 0.75, 1.0])
    stalled = np.array([0.0, 0.0, 1.0, 1.0, 0.0])
    assert travel_time(stalled, grid) == np.inf
    assert np.isinf(reconstruct_timestamps(stalled, grid)[-1])


def test_linearized_cost_is_gradient(rng):
    grid = np.linspace(0.0, 1.0, 7)
    x = np.concatenate([[0.0], rng.uniform(0.5, 2.0, size=5), [0.0]])
    gradient = linearized_cost(x, grid)
    assert gradient[0] == gradient[-1] == 0.0
    h = 1e-6
    for k in range(1, 6):
        step = np.zeros_like(x)
        step[k] = h
        numeric = (travel_time(x + step, grid) - travel_time(x - step, grid)) / (4.0 * h)
        assert gradient[k] == pytest.approx(numeric, rel=1e-5)


@pytest.mark.parametrize("succeeded, estimate, weight, expected", [
    (True, 10.0, 5.0, PredictionLabel.TRUE_POSITIVE),
    (True, 3.0, 5.0, PredictionLabel.FALSE_NEGATIVE),
    (False, 10.0, 5.0, PredictionLabel.FALSE_POSITIVE),
    (False, 3.0, 5.0, PredictionLabel.TRUE_NEGATIVE),
])
def test_classify_prediction(succeeded, estimate, weight, expected):
    assert classify_prediction(succeeded, estimate, weight) == expected


def test_prediction_metrics():
    labels = [PredictionLabel(v) for v in ("TN", "TN", "FP", "TP", "FN", "TP")]
    metrics = prediction_metrics(labels)
    assert metrics.counts == {"TP": 2, "TN": 2, "FN": 1, "FP": 1}
    assert metrics.true_negative_rate == pytest.approx(2 / 3)
    assert metrics.false_alarm_rate == pytest.approx(1 / 3)


def test_time_extension():
    assert time_extension(2.0, 2.5) == pytest.approx(25.0)
