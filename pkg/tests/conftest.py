import numpy as np
import pytest

from grasp_totp.config.settings import reset_settings
from grasp_totp.core.dynamics import KinematicChain, ObjectModel, PathSpec, RevoluteJoint
from grasp_totp.core.gripper import StiffnessWeights, build_gripper
from grasp_totp.core.se3 import RigidTransform

SIX_CUP_POSITIONS = [
    [-0.1, -0.05, 0.0],
    [0.0, -0.05, 0.0],
    [0.1, -0.05, 0.0],
    [-0.1, 0.05, 0.0],
    [0.0, 0.05, 0.0],
    [0.1, 0.05, 0.0],
]
SUCTION_FORCE = 118.6
PAD_RADIUS = 0.03
FRICTION = 0.7
TOP_DOWN = [np.pi, 0.0, 0.0]
SIDEWAYS = [0.0, np.pi / 2, 0.0]


@pytest.fixture(autouse=True)
def _fresh_settings():
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def six_cup():
    return build_gripper(SIX_CUP_POSITIONS, PAD_RADIUS, SUCTION_FORCE, FRICTION,
                         weights=StiffnessWeights(), pull_off_force=155.0)


@pytest.fixture
def single_cup():
    return build_gripper([[0.0, 0.0, 0.0]], PAD_RADIUS, SUCTION_FORCE, FRICTION)


def scara_chain(tool_rotvec) -> KinematicChain:
    return KinematicChain(
        joints=(
            RevoluteJoint([0.0, 0.0, 1.0]),
            RevoluteJoint([0.0, 0.0, 1.0], parent_offset=RigidTransform(translation=[0.35, 0.0, 0.0])),
        ),
        tool_offset=RigidTransform.from_rotvec(tool_rotvec, [0.3, 0.0, 0.4]),
    )


@pytest.fixture
def top_down_chain():
    return scara_chain(TOP_DOWN)


@pytest.fixture
def sideways_chain():
    return scara_chain(SIDEWAYS)


@pytest.fixture
def three_joint_chain():
    return KinematicChain(
        joints=(
            RevoluteJoint([0.0, 0.0, 1.0]),
            RevoluteJoint([0.0, 1.0, 0.0], origin=[0.0, 0.0, 0.3]),
            RevoluteJoint([0.0, 1.0, 0.0], origin=[0.4, 0.0, 0.3]),
        ),
        tool_offset=RigidTransform.from_rotvec([0.2, -0.1, 0.3], [0.7, 0.05, 0.25]),
    )


@pytest.fixture
def sweep_path():
    return PathSpec(np.array([[0.0, 0.0], [0.7, -0.5], [1.4, -0.9], [2.0, -0.6]]))


@pytest.fixture
def random_three_joint_path(rng):
    return PathSpec(rng.uniform(-1.0, 1.0, size=(5, 3)))


@pytest.fixture
def box_object():
    return ObjectModel.from_box(2.0, [0.3, 0.2, 0.1], [0.0, 0.0, 0.05])
