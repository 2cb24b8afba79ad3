"""
Serial-chain kinematics and the Newton-Euler tool wrench.

The tool wrench along a path q(s) is affine in (s_ddot, s_dot^2):
    F_t = b_ddot * s_ddot + b_dot * s_dot^2 + b_const
"""
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from ..exceptions import ConfigError, DimensionMismatch
from .se3 import RigidTransform, Wrench, adjoint, compose, inverse, skew

logger = logging.getLogger(__name__)

GRAVITY = 9.8


@dataclass(frozen=True, eq=False)
class RevoluteJoint:
    """Rotation about ``axis`` through ``origin``, both in the frame after ``parent_offset``"""
    axis: np.ndarray
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    parent_offset: RigidTransform = field(default_factory=RigidTransform)

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        norm = np.linalg.norm(axis)
        if norm == 0.0:
            raise ConfigError("joint axis must be non-zero")
        if abs(norm - 1.0) > 1e-12:
            axis = axis / norm
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))

    @property
    def screw(self) -> np.ndarray:
        """Unit twist (omega, -omega x origin) in the joint frame"""
        return np.concatenate([self.axis, -np.cross(self.axis, self.origin)])

    def motion(self, angle: float) -> RigidTransform:
        rotation = RigidTransform.from_rotvec(self.axis * angle).rotation
        return RigidTransform(rotation, self.origin - rotation @ self.origin)


@dataclass(frozen=True, eq=False)
class KinematicChain:
    joints: Tuple[RevoluteJoint, ...]
    tool_offset: RigidTransform = field(default_factory=RigidTransform)

    def __post_init__(self):
        joints = tuple(self.joints)
        if len(joints) < 1:
            raise ConfigError("a kinematic chain needs at least one joint")
        object.__setattr__(self, "joints", joints)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    def _check(self, q: Sequence[float]) -> np.ndarray:
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.size != self.n_joints:
            raise DimensionMismatch(f"expected {self.n_joints} joint values, got {q.size}")
        return q

    def joint_frames(self, q: Sequence[float]) -> Tuple[List[RigidTransform], RigidTransform]:
        """World poses of each joint frame (after its rotation) and of the tool"""
        q = self._check(q)
        pose = RigidTransform()
        frames = []
        for joint, angle in zip(self.joints, q):
            pose = compose(compose(pose, joint.parent_offset), joint.motion(angle))
            frames.append(pose)
        return frames, compose(pose, self.tool_offset)


def forward_kinematics(chain: KinematicChain, q: Sequence[float]) -> RigidTransform:
    """Tool pose in the world frame"""
    _, tool = chain.joint_frames(q)
    return tool


def body_jacobian(chain: KinematicChain, q: Sequence[float]) -> np.ndarray:
    """
    6 x n Jacobian mapping joint rates to the tool body twist (omega_t; v_t).

    Raises:
        DimensionMismatch: if q has the wrong length
    """
    frames, tool = chain.joint_frames(q)
    columns = []
    for joint, frame in zip(chain.joints, frames):
        tool_in_joint = compose(inverse(frame), tool)
        columns.append(adjoint(inverse(tool_in_joint)) @ joint.screw)
    return np.column_stack(columns)


@dataclass(frozen=True, eq=False)
class ObjectModel:
    """Grasped object: mass (kg), CoM inertia in tool-aligned axes, CoM offset in the tool frame"""
    mass: float
    inertia: np.ndarray
    com_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not self.mass > 0.0:
            raise ConfigError(f"object mass must be positive, got {self.mass}")
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3, 3):
            raise DimensionMismatch(f"inertia must be 3x3, got {inertia.shape}")
        if np.max(np.abs(inertia - inertia.T)) > 1e-12:
            raise ConfigError("inertia must be symmetric")
        if np.min(np.linalg.eigvalsh(inertia)) <= 0.0:
            raise ConfigError("inertia must be positive definite")
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "com_offset", np.asarray(self.com_offset, dtype=float).reshape(3))

    @classmethod
    def from_box(cls, mass: float, dims: Sequence[float],
                 com_offset: Optional[Sequence[float]] = None) -> "ObjectModel":
        """Uniform-density box with side lengths (a, b, c)"""
        a, b, c = (float(v) for v in dims)
        inertia = mass / 12.0 * np.diag([b ** 2 + c ** 2, c ** 2 + a ** 2, a ** 2 + b ** 2])
        return cls(mass, inertia, np.zeros(3) if com_offset is None else com_offset)

    def with_mass(self, mass: float) -> "ObjectModel":
        """Same shape and density profile, inertia scaled with mass"""
        return replace(self, mass=mass, inertia=self.inertia * (mass / self.mass))


@dataclass(eq=False)
class PathSpec:
    """
    Joint path q(s) through knots on a strictly increasing grid from 0 to 1,
    interpolated by a clamped cubic spline per joint.
    """
    knots: np.ndarray
    grid: Optional[np.ndarray] = None
    start_derivative: Optional[np.ndarray] = None
    end_derivative: Optional[np.ndarray] = None
    spline: CubicSpline = field(init=False)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        if knots.ndim == 1:
            knots = knots[:, None]
        if knots.shape[0] < 2:
            raise ConfigError("a path needs at least two knots")
        grid = np.linspace(0.0, 1.0, knots.shape[0]) if self.grid is None else np.asarray(self.grid, dtype=float)
        if grid.shape != (knots.shape[0],):
            raise DimensionMismatch(f"grid has {grid.size} points for {knots.shape[0]} knots")
        if np.any(np.diff(grid) <= 0.0) or grid[0] != 0.0 or grid[-1] != 1.0:
            raise ConfigError("path grid must increase strictly from 0 to 1")

        edge_order = 2 if knots.shape[0] > 2 else 1
        slopes = np.gradient(knots, grid, axis=0, edge_order=edge_order)
        d0 = slopes[0] if self.start_derivative is None else np.asarray(self.start_derivative, dtype=float)
        d1 = slopes[-1] if self.end_derivative is None else np.asarray(self.end_derivative, dtype=float)

        self.knots = knots
        self.grid = grid
        self.spline = CubicSpline(grid, knots, axis=0, bc_type=((1, d0), (1, d1)))

    @property
    def n_joints(self) -> int:
        return self.knots.shape[1]

    def q(self, s: float) -> np.ndarray:
        return self.spline(s)

    def dq(self, s: float) -> np.ndarray:
        return self.spline(s, 1)

    def ddq(self, s: float) -> np.ndarray:
        return self.spline(s, 2)

    def dddq(self, s: float) -> np.ndarray:
        return self.spline(s, 3)

    def cell_width(self, s: float) -> float:
        index = int(np.clip(np.searchsorted(self.grid, s, side="right") - 1, 0, self.grid.size - 2))
        return float(self.grid[index + 1] - self.grid[index])


@dataclass(frozen=True, eq=False)
class ToolMotion:
    gravity_in_tool: np.ndarray
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))
    linear_acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True, eq=False)
class WrenchAffineForm:
    b_ddot: np.ndarray
    b_dot: np.ndarray
    b_const: np.ndarray

    def evaluate(self, sdot_sq: float, sddot: float) -> np.ndarray:
        return self.b_ddot * sddot + self.b_dot * sdot_sq + self.b_const

    def scaled(self, factor: float) -> "WrenchAffineForm":
        return WrenchAffineForm(self.b_ddot * factor, self.b_dot * factor, self.b_const * factor)


def newton_euler_tool_wrench(motion: ToolMotion, obj: ObjectModel) -> Wrench:
    """
    Wrench at the tool origin that carries the object through ``motion``:
        moment = I alpha + omega x I omega + m [p]x (a + [p]x alpha - g)
        force  = m (a + [p]x alpha - g)
    """
    p_skew = skew(obj.com_offset)
    omega = motion.angular_velocity
    alpha = motion.angular_acceleration
    linear = motion.linear_acceleration + p_skew @ alpha - motion.gravity_in_tool
    force = obj.mass * linear
    moment = obj.inertia @ alpha + np.cross(omega, obj.inertia @ omega) + p_skew @ force
    return Wrench(moment, force)


def default_jacobian_step(path: PathSpec, s: float) -> float:
    return float(np.clip(1e-3 * path.cell_width(s), 1e-7, 1e-4))


def jacobian_path_derivative(chain: KinematicChain, path: PathSpec, s: float,
                             step: Optional[float] = None) -> np.ndarray:
    """
    d J(q(s)) / ds by central differences; second-order one-sided near s = 0 or 1.
    """
    h = default_jacobian_step(path, s) if step is None else step

    def jac(at: float) -> np.ndarray:
        return body_jacobian(chain, path.q(at))

    if s - h < 0.0:
        return (-3.0 * jac(s) + 4.0 * jac(s + h) - jac(s + 2.0 * h)) / (2.0 * h)
    if s + h > 1.0:
        return (3.0 * jac(s) - 4.0 * jac(s - h) + jac(s - 2.0 * h)) / (2.0 * h)
    return (jac(s + h) - jac(s - h)) / (2.0 * h)


@dataclass(frozen=True, eq=False)
class PathKinematics:
    """Quantities at one path point needed by the wrench parameterization"""
    q: np.ndarray
    dq: np.ndarray
    ddq: np.ndarray
    jacobian: np.ndarray
    jacobian_ds: np.ndarray
    gravity_in_tool: np.ndarray


def path_kinematics(chain: KinematicChain, path: PathSpec, s: float, gravity: float = GRAVITY,
                    step: Optional[float] = None) -> PathKinematics:
    q = path.q(s)
    if q.size != chain.n_joints:
        raise DimensionMismatch(f"path has {q.size} joints, chain has {chain.n_joints}")
    tool = forward_kinematics(chain, q)
    return PathKinematics(
        q=q,
        dq=path.dq(s),
        ddq=path.ddq(s),
        jacobian=body_jacobian(chain, q),
        jacobian_ds=jacobian_path_derivative(chain, path, s, step),
        gravity_in_tool=tool.rotation.T @ np.array([0.0, 0.0, -gravity]),
    )


def tool_motion(chain: KinematicChain, path: PathSpec, s: float, sdot: float, sddot: float,
                gravity: float = GRAVITY, step: Optional[float] = None) -> ToolMotion:
    """
    Tool motion induced by following the path at (s, s_dot, s_ddot).

    linear_acceleration is the derivative of the body twist; omega x v is not added.
    """
    kin = path_kinematics(chain, path, s, gravity, step)
    twist = kin.jacobian @ kin.dq * sdot
    accel = kin.jacobian @ kin.dq * sddot + (kin.jacobian @ kin.ddq + kin.jacobian_ds @ kin.dq) * sdot ** 2
    return ToolMotion(
        gravity_in_tool=kin.gravity_in_tool,
        angular_velocity=twist[:3],
        angular_acceleration=accel[:3],
        linear_acceleration=accel[3:],
    )


def parameterize_wrench(chain: KinematicChain, path: PathSpec, obj: ObjectModel, s: float,
                        gravity: float = GRAVITY, step: Optional[float] = None) -> WrenchAffineForm:
    """Coefficients (b_ddot, b_dot, b_const) of the tool wrench at path point s"""
    kin = path_kinematics(chain, path, s, gravity, step)
    zero = np.zeros(3)
    first = kin.jacobian @ kin.dq
    second = kin.jacobian @ kin.ddq + kin.jacobian_ds @ kin.dq

    b_const = newton_euler_tool_wrench(ToolMotion(kin.gravity_in_tool), obj)
    b_ddot = newton_euler_tool_wrench(
        ToolMotion(zero, angular_acceleration=first[:3], linear_acceleration=first[3:]), obj
    )
    b_dot = newton_euler_tool_wrench(
        ToolMotion(zero, angular_velocity=first[:3], angular_acceleration=second[:3],
                   linear_acceleration=second[3:]),
        obj,
    )
    return WrenchAffineForm(b_ddot.as_vector(), b_dot.as_vector(), b_const.as_vector())
