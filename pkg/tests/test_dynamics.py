import numpy as np
import pytest

from grasp_totp.core.dynamics import (
    KinematicChain,
    ObjectModel,
    PathSpec,
    RevoluteJoint,
    ToolMotion,
    body_jacobian,
    forward_kinematics,
    jacobian_path_derivative,
    newton_euler_tool_wrench,
    parameterize_wrench,
    path_kinematics,
    tool_motion,
)
from grasp_totp.core.se3 import RigidTransform, inverse
from grasp_totp.exceptions import ConfigError, DimensionMismatch


def finite_difference_jacobian(chain, q, h=1e-6):
    """Body twist columns from T^-1 dT/dq_j"""
    tool_inverse = inverse(forward_kinematics(chain, q)).as_matrix()
    columns = []
    for j in range(chain.n_joints):
        step = np.zeros_like(q)
        step[j] = h
        d_pose = (forward_kinematics(chain, q + step).as_matrix()
                  - forward_kinematics(chain, q - step).as_matrix()) / (2.0 * h)
        body = tool_inverse @ d_pose
        omega = np.array([body[2, 1], body[0, 2], body[1, 0]])
        columns.append(np.concatenate([omega, body[:3, 3]]))
    return np.column_stack(columns)


def test_jacobian_matches_forward_kinematics(three_joint_chain, rng):
    for _ in range(5):
        q = rng.uniform(-np.pi, np.pi, size=3)
        np.testing.assert_allclose(body_jacobian(three_joint_chain, q),
                                   finite_difference_jacobian(three_joint_chain, q), atol=1e-7)


def test_single_joint_column():
    chain = KinematicChain((RevoluteJoint([0.0, 0.0, 1.0]),), RigidTransform(translation=[1.0, 0.0, 0.0]))
    np.testing.assert_allclose(body_jacobian(chain, [0.0])[:, 0], [0, 0, 1, 0, 1, 0], atol=1e-12)


def test_jacobian_rejects_wrong_joint_count(three_joint_chain):
    with pytest.raises(DimensionMismatch):
        body_jacobian(three_joint_chain, [0.0, 0.0])


def planar_arm(upper, lower):
    return KinematicChain(
        joints=(
            RevoluteJoint([0.0, 0.0, 1.0]),
            RevoluteJoint([0.0, 0.0, 1.0], parent_offset=RigidTransform(translation=[upper, 0.0, 0.0])),
        ),
        tool_offset=RigidTransform(translation=[lower, 0.0, 0.0]),
    )


def test_jacobian_path_derivative_of_planar_arm():
    upper, lower = 0.4, 0.3
    chain = planar_arm(upper, lower)
    path = PathSpec(np.array([[0.0, 0.2], [0.5, 1.4]]))
    rate = 1.2
    for s in (0.0, 0.4, 1.0):
        elbow = 0.2 + rate * s
        # first column's linear part is (upper sin q2, upper cos q2 + lower, 0)
        np.testing.assert_allclose(body_jacobian(chain, path.q(s))[3:, 0],
                                   [upper * np.sin(elbow), upper * np.cos(elbow) + lower, 0.0], atol=1e-12)
        expected = np.zeros((6, 2))
        expected[3, 0] = upper * rate * np.cos(elbow)
        expected[4, 0] = -upper * rate * np.sin(elbow)
        np.testing.assert_allclose(jacobian_path_derivative(chain, path, s), expected, atol=1e-7)


def test_jacobian_path_derivative_agrees_with_richardson(three_joint_chain, random_three_joint_path):
    s, h = 0.37, 2e-3
    coarse = jacobian_path_derivative(three_joint_chain, random_three_joint_path, s, step=h)
    halved = jacobian_path_derivative(three_joint_chain, random_three_joint_path, s, step=h / 2.0)
    extrapolated = (4.0 * halved - coarse) / 3.0
    default = jacobian_path_derivative(three_joint_chain, random_three_joint_path, s)
    np.testing.assert_allclose(default, extrapolated, atol=1e-6 * (1.0 + np.abs(extrapolated).max()))


def test_statics_wrench():
    obj = ObjectModel(10.0, np.eye(3))
    wrench = newton_euler_tool_wrench(ToolMotion(np.array([0.0, 0.0, -9.8])), obj)
    np.testing.assert_allclose(wrench.as_vector(), [0, 0, 0, 0, 0, 98.0])


def test_offset_center_of_mass_adds_moment():
    obj = ObjectModel(10.0, np.eye(3), [0.1, 0.0, 0.0])
    wrench = newton_euler_tool_wrench(ToolMotion(np.array([0.0, 0.0, -9.8])), obj)
    np.testing.assert_allclose(wrench.moment, [0.0, -9.8, 0.0])


def test_spinning_object_gyroscopic_moment():
    obj = ObjectModel(1.0, np.diag([1.0, 2.0, 3.0]))
    motion = ToolMotion(np.zeros(3), angular_velocity=np.array([1.0, 1.0, 0.0]))
    np.testing.assert_allclose(newton_euler_tool_wrench(motion, obj).moment,
                               np.cross([1.0, 1.0, 0.0], [1.0, 2.0, 0.0]))


def test_top_down_tool_sees_gravity_along_plus_z(top_down_chain, sweep_path):
    kin = path_kinematics(top_down_chain, sweep_path, 0.3)
    np.testing.assert_allclose(kin.gravity_in_tool, [0.0, 0.0, 9.8], atol=1e-12)


def test_wrench_is_affine_in_path_rates(three_joint_chain, random_three_joint_path, box_object, rng):
    for _ in range(50):
        s = rng.uniform(0.0, 1.0)
        sdot = rng.uniform(0.0, 3.0)
        sddot = rng.uniform(-5.0, 5.0)
        form = parameterize_wrench(three_joint_chain, random_three_joint_path, box_object, s)
        motion = tool_motion(three_joint_chain, random_three_joint_path, s, sdot, sddot)
        direct = newton_euler_tool_wrench(motion, box_object).as_vector()
        np.testing.assert_allclose(form.evaluate(sdot ** 2, sddot), direct, rtol=1e-9, atol=1e-9)


def test_stationary_path_has_only_gravity_term(three_joint_chain, box_object):
    path = PathSpec(np.tile([0.2, -0.4, 0.9], (3, 1)))
    form = parameterize_wrench(three_joint_chain, path, box_object, 0.5)
    np.testing.assert_allclose(form.b_ddot, 0.0, atol=1e-12)
    np.testing.assert_allclose(form.b_dot, 0.0, atol=1e-12)
    assert np.linalg.norm(form.b_const[3:]) == pytest.approx(box_object.mass * 9.8)


def test_box_inertia_and_mass_scaling():
    box = ObjectModel.from_box(12.0, [0.3, 0.2, 0.1])
    np.testing.assert_allclose(np.diag(box.inertia), [0.05, 0.1, 0.13])
    light = box.with_mass(3.0)
    assert light.mass == 3.0
    np.testing.assert_allclose(light.inertia, box.inertia / 4.0)


def test_object_validation():
    with pytest.raises(ConfigError):
        ObjectModel(0.0, np.eye(3))
    with pytest.raises(ConfigError):
        ObjectModel(1.0, np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(DimensionMismatch):
        ObjectModel(1.0, np.eye(2))


def test_path_validation():
    with pytest.raises(ConfigError):
        PathSpec(np.array([[0.0]]))
    with pytest.raises(ConfigError):
        PathSpec(np.array([0.0, 1.0, 2.0]), grid=[0.0, 0.6, 0.5])
    with pytest.raises(DimensionMismatch):
        PathSpec(np.array([0.0, 1.0]), grid=[0.0, 0.5, 1.0])


def test_path_interpolates_knots(sweep_path):
    for s, knot in zip(sweep_path.grid, sweep_path.knots):
        np.testing.assert_allclose(sweep_path.q(s), knot, atol=1e-12)


def test_clamped_end_derivatives():
    path = PathSpec(np.array([0.0, 1.0, 0.0]), start_derivative=[0.0], end_derivative=[0.0])
    np.testing.assert_allclose(path.dq(0.0), 0.0, atol=1e-12)
    np.testing.assert_allclose(path.dq(1.0), 0.0, atol=1e-12)
