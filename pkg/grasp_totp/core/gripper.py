"""
Multi-suction-cup gripper geometry and the constant failure-test matrices.

All failure tests are plain ``M @ w <= rhs`` forms: the suction offsets
psi_i are folded into the right-hand sides.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag

from ..exceptions import ConfigError, DegenerateGripper, NonPlanarGripper
from .se3 import RigidTransform, Wrench, skew, wrench_transport

logger = logging.getLogger(__name__)

PLANARITY_TOL_RAD = 1e-6
RING_DIRECTIONS = np.array([
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
])
RING_POINT_COUNT = len(RING_DIRECTIONS)
SUCTION_ROWS_PER_CUP = 5
SLIPPAGE_ROWS = 12


class ThresholdDirection(str, Enum):
    """Comparison used to flag a cup as compressed"""
    GREATER_THAN = "greater-than"
    LESS_THAN = "less-than"


class CapacityModel(str, Enum):
    """Which per-cup force bounds the pulling load"""
    SUCTION = "suction"
    PULL_OFF = "pull-off"


@dataclass(frozen=True, eq=False)
class SuctionCup:
    """Single cup: pose in the tool frame, pad radius (m), suction force (N)"""
    pose_in_tool: RigidTransform
    pad_radius: float
    suction_force: float
    pull_off_force: Optional[float] = None

    def __post_init__(self):
        if not self.pad_radius > 0.0:
            raise ConfigError(f"pad_radius must be positive, got {self.pad_radius}")
        if not self.suction_force >= 0.0:
            raise ConfigError(f"suction_force must be non-negative, got {self.suction_force}")
        if self.pull_off_force is not None and not self.pull_off_force >= 0.0:
            raise ConfigError(f"pull_off_force must be non-negative, got {self.pull_off_force}")

    @property
    def ring_points(self) -> np.ndarray:
        """4x3 rim points in the cup frame at 0, 90, 180 and 270 degrees"""
        return self.pad_radius * RING_DIRECTIONS

    @property
    def normal_in_tool(self) -> np.ndarray:
        return self.pose_in_tool.rotation[:, 2]

    def capacity(self, model: CapacityModel = CapacityModel.SUCTION) -> float:
        if model == CapacityModel.PULL_OFF:
            return float(self.pull_off_force)
        return float(self.suction_force)


@dataclass(frozen=True, eq=False)
class StiffnessWeights:
    """Diagonal spring weights for the normal and compressed cup phases"""
    normal: Tuple[float, float, float] = (1.0, 1.0, 2.3682)
    compressed: Tuple[float, float, float] = (0.8369, 0.8369, 0.1321)
    compression_threshold: float = 47.19
    threshold_direction: ThresholdDirection = ThresholdDirection.GREATER_THAN

    def __post_init__(self):
        normal = tuple(float(v) for v in self.normal)
        compressed = tuple(float(v) for v in self.compressed)
        if len(normal) != 3 or len(compressed) != 3:
            raise ConfigError("stiffness weights need exactly 3 entries")
        if min(normal + compressed) <= 0.0:
            raise ConfigError(f"stiffness weights must be positive: {normal}, {compressed}")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "compressed", compressed)
        object.__setattr__(self, "threshold_direction", ThresholdDirection(self.threshold_direction))

    def is_compressed(self, normal_force: float) -> bool:
        if self.threshold_direction == ThresholdDirection.GREATER_THAN:
            return normal_force > self.compression_threshold
        return normal_force < self.compression_threshold


@dataclass(frozen=True, eq=False)
class DistributionMatrices:
    A_s: np.ndarray
    A_g: np.ndarray
    A: np.ndarray


@dataclass(frozen=True, eq=False)
class SuctionLossBlocks:
    U_bar: np.ndarray
    u_bar: np.ndarray


@dataclass(frozen=True, eq=False)
class SlippageBlock:
    U_t: np.ndarray
    u_t: np.ndarray


@dataclass(frozen=True, eq=False)
class GripperModel:
    """
    Gripper made of suction cups sharing one friction coefficient.

    polygon_extent_x / polygon_extent_y are derived: the maximum |x| and |y|
    of the cup centers in the tool frame.
    """
    cups: Tuple[SuctionCup, ...]
    friction: float
    weights: StiffnessWeights = field(default_factory=StiffnessWeights)
    capacity_model: CapacityModel = CapacityModel.SUCTION
    polygon_extent_x: float = field(init=False)
    polygon_extent_y: float = field(init=False)

    def __post_init__(self):
        cups = tuple(self.cups)
        if len(cups) < 1:
            raise ConfigError("a gripper needs at least one cup")
        if not self.friction > 0.0:
            raise ConfigError(f"friction must be positive, got {self.friction}")
        capacity_model = CapacityModel(self.capacity_model)
        if capacity_model == CapacityModel.PULL_OFF:
            missing = [i for i, cup in enumerate(cups) if cup.pull_off_force is None]
            if missing:
                raise ConfigError(f"pull-off capacity selected but cups {missing} have no pull_off_force")
        centers = np.array([cup.pose_in_tool.translation for cup in cups])
        object.__setattr__(self, "cups", cups)
        object.__setattr__(self, "capacity_model", capacity_model)
        object.__setattr__(self, "polygon_extent_x", float(np.max(np.abs(centers[:, 0]))))
        object.__setattr__(self, "polygon_extent_y", float(np.max(np.abs(centers[:, 1]))))

    @property
    def n_cups(self) -> int:
        return len(self.cups)

    @property
    def capacities(self) -> np.ndarray:
        return np.array([cup.capacity(self.capacity_model) for cup in self.cups])

    def with_weights(self, weights: StiffnessWeights) -> "GripperModel":
        return replace(self, weights=weights)

    def without_cups(self, indices: Iterable[int]) -> "GripperModel":
        """Same gripper with the given (0-based) cups removed"""
        dropped = set(indices)
        kept = [cup for i, cup in enumerate(self.cups) if i not in dropped]
        return replace(self, cups=tuple(kept))


def cup_ring_map(cup: SuctionCup) -> np.ndarray:
    """
    6x12 map from the stacked ring forces to the cup wrench.

    Args:
        cup: suction cup

    Returns:
        A_i with [p_j]x blocks on top and identity blocks below
    """
    ring_map = np.zeros((6, 3 * RING_POINT_COUNT))
    for j, point in enumerate(cup.ring_points):
        ring_map[:3, 3 * j:3 * j + 3] = skew(point)
        ring_map[3:, 3 * j:3 * j + 3] = np.eye(3)
    return ring_map


def cup_transports(g: GripperModel) -> List[np.ndarray]:
    """Per-cup wrench transport from the cup frame to the tool frame"""
    return [wrench_transport(cup.pose_in_tool) for cup in g.cups]


def assemble_distribution_matrices(g: GripperModel) -> DistributionMatrices:
    """
    Build A_s (block-diagonal ring maps), A_g (stacked cup-to-tool
    transports) and A = A_g A_s.

    Raises:
        DegenerateGripper: if rank(A) < 6
    """
    A_s = block_diag(*[cup_ring_map(cup) for cup in g.cups])
    A_g = np.hstack(cup_transports(g))
    A = A_g @ A_s
    rank = np.linalg.matrix_rank(A)
    if rank < 6:
        raise DegenerateGripper(f"distribution matrix has rank {rank} < 6")
    return DistributionMatrices(A_s=A_s, A_g=A_g, A=A)


def suction_loss_matrix(pad_radius: float) -> np.ndarray:
    """5x6 per-cup block with rows {-f_z; +-m_x +- m_y - r f_z}"""
    r = pad_radius
    return np.array([
        [0.0, 0.0, 0.0, 0.0, 0.0, -1.0],
        [1.0, 1.0, 0.0, 0.0, 0.0, -r],
        [1.0, -1.0, 0.0, 0.0, 0.0, -r],
        [-1.0, 1.0, 0.0, 0.0, 0.0, -r],
        [-1.0, -1.0, 0.0, 0.0, 0.0, -r],
    ])


def suction_loss_blocks(g: GripperModel) -> SuctionLossBlocks:
    """
    Stacked suction-loss test U_bar @ F_bar <= u_bar over all cups.

    Each cup contributes rhs {psi_i; r_pad psi_i (x4)}.
    """
    U_bar = block_diag(*[suction_loss_matrix(cup.pad_radius) for cup in g.cups])
    u_bar = np.concatenate([
        [psi] + [cup.pad_radius * psi] * 4
        for cup, psi in zip(g.cups, g.capacities)
    ])
    return SuctionLossBlocks(U_bar=U_bar, u_bar=np.asarray(u_bar, dtype=float))


def slippage_matrix(mu: float, X: float, Y: float) -> np.ndarray:
    """12x6 friction pyramid (rows 1-4) and torsion/moment rows (5-12)"""
    rows = [
        [0.0, 0.0, 0.0, 1.0, 1.0, -mu],
        [0.0, 0.0, 0.0, 1.0, -1.0, -mu],
        [0.0, 0.0, 0.0, -1.0, 1.0, -mu],
        [0.0, 0.0, 0.0, -1.0, -1.0, -mu],
    ]
    # (sign m_x, sign m_y, sign f_x Y, sign f_y X)
    moment_signs = [
        (1, 1, -1, -1),
        (1, -1, -1, 1),
        (-1, 1, 1, -1),
        (-1, -1, 1, 1),
        (1, 1, 1, 1),
        (1, -1, 1, -1),
        (-1, 1, -1, 1),
        (-1, -1, -1, -1),
    ]
    for sx, sy, sfx, sfy in moment_signs:
        rows.append([sx * mu, sy * mu, -1.0, sfx * Y, sfy * X, -mu * (X + Y)])
    return np.array(rows)


def check_planar(g: GripperModel) -> None:
    """Raise NonPlanarGripper if a cup normal leaves the tool z-axis"""
    tool_z = np.array([0.0, 0.0, 1.0])
    for index, cup in enumerate(g.cups):
        normal = cup.normal_in_tool
        angle = np.arctan2(np.linalg.norm(np.cross(normal, tool_z)), normal @ tool_z)
        if angle > PLANARITY_TOL_RAD:
            raise NonPlanarGripper(
                f"cup {index} normal deviates {angle:.3g} rad from the tool z-axis"
            )


def total_suction_wrench(g: GripperModel) -> Wrench:
    """Sum of the per-cup suction wrenches (0,0,0,0,0,psi_i) in the tool frame"""
    total = np.zeros(6)
    for transport, psi in zip(cup_transports(g), g.capacities):
        total += transport @ np.array([0.0, 0.0, 0.0, 0.0, 0.0, psi])
    return Wrench.from_vector(total)


def slippage_block(g: GripperModel) -> SlippageBlock:
    """
    Gripper-level slippage test U_t @ F_t <= u_t with u_t = -U_t Psi_t.

    Raises:
        NonPlanarGripper: if any cup normal is not parallel to tool z
    """
    check_planar(g)
    U_t = slippage_matrix(g.friction, g.polygon_extent_x, g.polygon_extent_y)
    u_t = -U_t @ total_suction_wrench(g).as_vector()
    return SlippageBlock(U_t=U_t, u_t=u_t)


def build_gripper(cup_positions: Sequence[Sequence[float]], pad_radius: float, suction_force: float,
                  friction: float, weights: Optional[StiffnessWeights] = None,
                  pull_off_force: Optional[float] = None) -> GripperModel:
    """Planar gripper with identical cups facing along tool z"""
    cups = tuple(
        SuctionCup(RigidTransform(np.eye(3), position), pad_radius, suction_force, pull_off_force)
        for position in cup_positions
    )
    return GripperModel(cups=cups, friction=friction, weights=weights or StiffnessWeights())
