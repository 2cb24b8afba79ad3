"""
Rigid-body transform, twist and wrench algebra.

Conventions:
    - A transform T_a_b = (R, p) maps points of frame {b} into frame {a}:
      x_a = R x_b + p.
    - Wrenches are stacked (moment, force); twists are stacked (angular, linear).
    - Twists map as V_a = Ad(T_a_b) V_b; wrenches as F_a = Ad(T_b_a)^T F_b.
"""
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import polar
from scipy.spatial.transform import Rotation

from ..exceptions import DimensionMismatch, InvalidTransform

logger = logging.getLogger(__name__)

ORTHONORMAL_TOL = 1e-10
REORTHONORMALIZE_WARN_TOL = 1e-8
MAX_ROTATION_DRIFT = 1e-3


def _frozen(values, shape) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.shape != shape:
        raise DimensionMismatch(f"expected shape {shape}, got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise DimensionMismatch("non-finite entries")
    array.setflags(write=False)
    return array


def skew(v: Sequence[float]) -> np.ndarray:
    """Cross-product matrix: skew(v) @ w == v x w."""
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ])


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Proper rigid transform with a validated rotation block"""
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rotation = np.array(self.rotation, dtype=float)
        if rotation.shape != (3, 3) or not np.all(np.isfinite(rotation)):
            raise InvalidTransform(f"rotation must be a finite 3x3 matrix, got shape {rotation.shape}")

        drift = np.max(np.abs(rotation.T @ rotation - np.eye(3)))
        if drift > MAX_ROTATION_DRIFT:
            raise InvalidTransform(f"rotation is not orthonormal (drift {drift:.3g})")
        if drift > ORTHONORMAL_TOL:
            if drift > REORTHONORMALIZE_WARN_TOL:
                logger.warning(f"Re-orthonormalizing rotation with drift {drift:.3g}")
            rotation, _ = polar(rotation)
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOL:
            raise InvalidTransform("rotation determinant is not +1")

        object.__setattr__(self, "rotation", _frozen(rotation, (3, 3)))
        object.__setattr__(self, "translation", _frozen(self.translation, (3,)))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_rotvec(cls, rotvec: Sequence[float], translation: Optional[Sequence[float]] = None) -> "RigidTransform":
        """Build from an axis-angle vector (radians)"""
        rotation = Rotation.from_rotvec(np.asarray(rotvec, dtype=float)).as_matrix()
        return cls(rotation, np.zeros(3) if translation is None else translation)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "RigidTransform":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (4, 4):
            raise DimensionMismatch(f"homogeneous matrix must be 4x4, got {matrix.shape}")
        return cls(matrix[:3, :3], matrix[:3, 3])

    def as_matrix(self) -> np.ndarray:
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation
        matrix[:3, 3] = self.translation
        return matrix

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map points (shape (3,) or (n, 3)) from the child frame into this frame"""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)


@dataclass(frozen=True, eq=False)
class Wrench:
    """Moment (N m) and force (N) acting at a frame origin"""
    moment: np.ndarray = field(default_factory=lambda: np.zeros(3))
    force: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "moment", _frozen(self.moment, (3,)))
        object.__setattr__(self, "force", _frozen(self.force, (3,)))

    @classmethod
    def from_vector(cls, values: Iterable[float]) -> "Wrench":
        vector = np.asarray(list(values), dtype=float)
        if vector.shape != (6,):
            raise DimensionMismatch(f"wrench needs 6 components, got {vector.size}")
        return cls(vector[:3], vector[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.moment, self.force])


@dataclass(frozen=True, eq=False)
class Twist:
    """Angular (rad/s) and linear (m/s) velocity of a frame"""
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))
    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "angular", _frozen(self.angular, (3,)))
        object.__setattr__(self, "linear", _frozen(self.linear, (3,)))

    @classmethod
    def from_vector(cls, values: Iterable[float]) -> "Twist":
        vector = np.asarray(list(values), dtype=float)
        if vector.shape != (6,):
            raise DimensionMismatch(f"twist needs 6 components, got {vector.size}")
        return cls(vector[:3], vector[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.angular, self.linear])


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """(a o b)(x) = a(b(x))"""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def inverse(t: RigidTransform) -> RigidTransform:
    rotation_t = t.rotation.T
    return RigidTransform(rotation_t, -rotation_t @ t.translation)


def adjoint(t: RigidTransform) -> np.ndarray:
    """[[R, 0], [[p]x R, R]]"""
    ad = np.zeros((6, 6))
    ad[:3, :3] = t.rotation
    ad[3:, 3:] = t.rotation
    ad[3:, :3] = skew(t.translation) @ t.rotation
    return ad


def wrench_transport(child_pose: RigidTransform) -> np.ndarray:
    """
    Matrix mapping a wrench expressed in a child frame to the parent frame.

    Args:
        child_pose: pose of the child frame in the parent frame

    Returns:
        6x6 matrix Ad(child_pose^-1)^T = [[R, [p]x R], [0, R]]
    """
    return adjoint(inverse(child_pose)).T


def transform_wrench(child_pose: RigidTransform, wrench: Wrench) -> Wrench:
    return Wrench.from_vector(wrench_transport(child_pose) @ wrench.as_vector())


def transform_twist(child_pose: RigidTransform, twist: Twist) -> Twist:
    return Twist.from_vector(adjoint(child_pose) @ twist.as_vector())


def rotation_from_z_axis(z_axis: Sequence[float]) -> np.ndarray:
    """
    Rotation whose third column is the unit z_axis.

    The x column is the parent x-axis projected orthogonal to z_axis
    (parent y-axis when z_axis is parallel to x).
    """
    z = np.asarray(z_axis, dtype=float)
    norm = np.linalg.norm(z)
    if norm == 0.0:
        raise InvalidTransform("z_axis must be non-zero")
    z = z / norm
    reference = np.array([1.0, 0.0, 0.0])
    if abs(z @ reference) > 1.0 - 1e-9:
        reference = np.array([0.0, 1.0, 0.0])
    x = reference - (reference @ z) * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.column_stack([x, y, z])
