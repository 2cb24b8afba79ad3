import numpy as np
import pytest

from grasp_totp.core.gripper import (
    SLIPPAGE_ROWS,
    SUCTION_ROWS_PER_CUP,
    CapacityModel,
    GripperModel,
    StiffnessWeights,
    SuctionCup,
    assemble_distribution_matrices,
    cup_ring_map,
    slippage_block,
    suction_loss_blocks,
    total_suction_wrench,
)
from grasp_totp.core.se3 import RigidTransform, rotation_from_z_axis
from grasp_totp.exceptions import ConfigError, NonPlanarGripper

from .conftest import FRICTION, PAD_RADIUS, SUCTION_FORCE


def test_ring_map_of_uniform_pull(single_cup):
    ring_forces = np.tile([0.0, 0.0, -10.0], 4)
    wrench = cup_ring_map(single_cup.cups[0]) @ ring_forces
    np.testing.assert_allclose(wrench, [0.0, 0.0, 0.0, 0.0, 0.0, -40.0], atol=1e-12)


def test_ring_point_force_moment_matches_cross_product(single_cup):
    ring_forces = np.zeros(12)
    ring_forces[2] = 5.0
    wrench = cup_ring_map(single_cup.cups[0]) @ ring_forces
    np.testing.assert_allclose(wrench[:3], np.cross([PAD_RADIUS, 0.0, 0.0], [0.0, 0.0, 5.0]))


def test_distribution_matrices_have_full_rank(six_cup):
    matrices = assemble_distribution_matrices(six_cup)
    assert matrices.A.shape == (6, 72)
    assert matrices.A_s.shape == (36, 72)
    assert matrices.A_g.shape == (6, 36)
    assert np.linalg.matrix_rank(matrices.A) == 6


def test_polygon_extents(six_cup):
    assert six_cup.polygon_extent_x == pytest.approx(0.1)
    assert six_cup.polygon_extent_y == pytest.approx(0.05)


def test_suction_loss_pure_pull_violates_by_one_newton(six_cup):
    loss = suction_loss_blocks(six_cup)
    assert loss.U_bar.shape == (SUCTION_ROWS_PER_CUP * 6, 36)
    cup_wrenches = np.zeros(36)
    cup_wrenches[5] = -(SUCTION_FORCE + 1.0)
    violation = loss.U_bar @ cup_wrenches - loss.u_bar
    assert violation[0] == pytest.approx(1.0)
    assert np.all(violation[SUCTION_ROWS_PER_CUP:] < 0.0)


def test_suction_loss_rhs(six_cup):
    loss = suction_loss_blocks(six_cup)
    np.testing.assert_allclose(loss.u_bar[:5], [SUCTION_FORCE] + [PAD_RADIUS * SUCTION_FORCE] * 4)


def test_pull_off_capacity_model(six_cup):
    gripper = GripperModel(six_cup.cups, FRICTION, capacity_model=CapacityModel.PULL_OFF)
    np.testing.assert_allclose(gripper.capacities, 155.0)
    assert suction_loss_blocks(gripper).u_bar[0] == pytest.approx(155.0)


def test_pull_off_capacity_needs_pull_off_force(single_cup):
    with pytest.raises(ConfigError):
        GripperModel(single_cup.cups, FRICTION, capacity_model="pull-off")


def test_slippage_lateral_force_beyond_friction(six_cup):
    slip = slippage_block(six_cup)
    assert slip.U_t.shape == (SLIPPAGE_ROWS, 6)
    limit = FRICTION * 6 * SUCTION_FORCE
    np.testing.assert_allclose(slip.u_t[:4], limit)
    wrench = np.array([0.0, 0.0, 0.0, limit + 1.0, 0.0, 0.0])
    violation = slip.U_t @ wrench - slip.u_t
    assert violation[0] == pytest.approx(1.0)


def test_zero_wrench_holds(six_cup):
    slip = slippage_block(six_cup)
    loss = suction_loss_blocks(six_cup)
    assert np.all(slip.u_t > 0.0)
    assert np.all(loss.u_bar > 0.0)


def test_total_suction_wrench_of_symmetric_layout(six_cup):
    np.testing.assert_allclose(total_suction_wrench(six_cup).as_vector(),
                               [0.0, 0.0, 0.0, 0.0, 0.0, 6 * SUCTION_FORCE], atol=1e-12)


def test_tilted_cup_is_non_planar(single_cup):
    tilted = SuctionCup(RigidTransform(rotation_from_z_axis([0.0, 1.0, 1.0]), [0.1, 0.0, 0.0]),
                        PAD_RADIUS, SUCTION_FORCE)
    gripper = GripperModel(single_cup.cups + (tilted,), FRICTION)
    with pytest.raises(NonPlanarGripper):
        slippage_block(gripper)


def test_without_cups_builds_ablation(six_cup):
    four = six_cup.without_cups([2, 5])
    assert four.n_cups == 4
    assert four.polygon_extent_x == pytest.approx(0.1)
    np.testing.assert_allclose([c.pose_in_tool.translation[0] for c in four.cups], [-0.1, 0.0, -0.1, 0.0])


@pytest.mark.parametrize("direction, force, expected", [
    ("greater-than", 50.0, True),
    ("greater-than", 40.0, False),
    ("less-than", 40.0, True),
    ("less-than", 50.0, False),
])
def test_compression_threshold_direction(direction, force, expected):
    weights = StiffnessWeights(compression_threshold=47.19, threshold_direction=direction)
    assert weights.is_compressed(force) is expected


def test_non_positive_weights_rejected():
    with pytest.raises(ConfigError):
        StiffnessWeights(normal=(1.0, 0.0, 1.0))


def test_invalid_cup_parameters_rejected():
    with pytest.raises(ConfigError):
        SuctionCup(RigidTransform(), pad_radius=0.0, suction_force=10.0)
    with pytest.raises(ConfigError):
        SuctionCup(RigidTransform(), pad_radius=0.01, suction_force=-1.0)
