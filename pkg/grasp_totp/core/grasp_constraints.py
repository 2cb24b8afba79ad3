"""
Grasp-failure rows as affine constraints in (s_ddot, s_dot^2).

Suction-loss rows act on the distributed cup wrenches M_W F_t, slippage rows on
the tool wrench itself. Each stacked row reads

    zeta_ddot * s_ddot + zeta_dot * s_dot^2 + zeta_const <= 0
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import DimensionMismatch
from .dynamics import WrenchAffineForm
from .gripper import (
    SLIPPAGE_ROWS,
    SUCTION_ROWS_PER_CUP,
    DistributionMatrices,
    GripperModel,
    SlippageBlock,
    SuctionLossBlocks,
    assemble_distribution_matrices,
    slippage_block,
    suction_loss_blocks,
)
from .load_distribution import (
    SINGULAR_CONDITION_LIMIT,
    WeightMatrix,
    compression_flags,
    ring_force_operator,
    weights_for_flags,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RowLabel:
    """Provenance of one constraint row: which failure mode, cup and row produced it"""
    kind: str
    row: int
    cup: Optional[int] = None
    joint: Optional[int] = None

    def __str__(self) -> str:
        parts = []
        if self.cup is not None:
            parts.append(f"cup={self.cup}")
        if self.joint is not None:
            parts.append(f"joint={self.joint}")
        parts.append(f"row={self.row}")
        return f"{self.kind}[{','.join(parts)}]"


def grasp_row_labels(n_cups: int) -> List[RowLabel]:
    """Labels for the 5 N_s suction-loss rows followed by the 12 slippage rows"""
    labels = [
        RowLabel("suction-loss", row=r, cup=i)
        for i in range(n_cups)
        for r in range(SUCTION_ROWS_PER_CUP)
    ]
    labels.extend(RowLabel("slippage", row=r) for r in range(SLIPPAGE_ROWS))
    return labels


@dataclass(frozen=True, eq=False)
class DistributionMap:
    """6N_s x 6 operator M_W = A_s W^-1 A^T (A W^-1 A^T)^-1 from tool wrench to stacked cup wrenches"""
    matrix: np.ndarray
    weights_used: WeightMatrix

    def apply(self, tool_wrench: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(tool_wrench, dtype=float)


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    zeta_ddot: np.ndarray
    zeta_dot: np.ndarray
    zeta_const: np.ndarray
    row_labels: List[RowLabel]

    def __post_init__(self):
        m = len(self.row_labels)
        for name in ("zeta_ddot", "zeta_dot", "zeta_const"):
            if getattr(self, name).shape != (m,):
                raise DimensionMismatch(f"{name} has shape {getattr(self, name).shape}, expected ({m},)")

    @property
    def n_rows(self) -> int:
        return len(self.row_labels)

    def evaluate(self, sdot_sq: float, sddot: float) -> np.ndarray:
        """Row values; positive entries are violated"""
        return self.zeta_ddot * sddot + self.zeta_dot * sdot_sq + self.zeta_const


@dataclass(frozen=True, eq=False)
class DiscretizedConstraints:
    """coef_xk x_k + coef_xk1 x_{k+1} <= rhs"""
    coef_xk: np.ndarray
    coef_xk1: np.ndarray
    rhs: np.ndarray

    def evaluate(self, x_k: float, x_k1: float) -> np.ndarray:
        return self.coef_xk * x_k + self.coef_xk1 * x_k1 - self.rhs


def distribution_map(g: GripperModel, W: WeightMatrix,
                     matrices: Optional[DistributionMatrices] = None,
                     condition_limit: float = SINGULAR_CONDITION_LIMIT) -> DistributionMap:
    """
    Raises:
        SingularSystem: if A W^-1 A^T is ill conditioned
    """
    matrices = matrices or assemble_distribution_matrices(g)
    operator = ring_force_operator(matrices, W, condition_limit)
    return DistributionMap(matrix=matrices.A_s @ operator, weights_used=W)


def grasp_constraint_coeffs(form: WrenchAffineForm, g: GripperModel, dmap: DistributionMap,
                            loss: Optional[SuctionLossBlocks] = None,
                            slip: Optional[SlippageBlock] = None) -> ConstraintSet:
    """
    Stack the suction-loss test on M_W F_t and the slippage test on F_t, with
    F_t = b_ddot s_ddot + b_dot s_dot^2 + b_const.
    """
    loss = loss or suction_loss_blocks(g)
    slip = slip or slippage_block(g)
    suction = loss.U_bar @ dmap.matrix
    return ConstraintSet(
        zeta_ddot=np.concatenate([suction @ form.b_ddot, slip.U_t @ form.b_ddot]),
        zeta_dot=np.concatenate([suction @ form.b_dot, slip.U_t @ form.b_dot]),
        zeta_const=np.concatenate([
            suction @ form.b_const - loss.u_bar,
            slip.U_t @ form.b_const - slip.u_t,
        ]),
        row_labels=grasp_row_labels(g.n_cups),
    )


def discretize_constraints(cs: ConstraintSet, delta_k: float) -> DiscretizedConstraints:
    """Substitute s_dot^2 = x_k and s_ddot = (x_{k+1} - x_k) / (2 delta_k)"""
    if not delta_k > 0.0:
        raise ValueError(f"grid spacing must be positive, got {delta_k}")
    half = cs.zeta_ddot / (2.0 * delta_k)
    return DiscretizedConstraints(
        coef_xk=cs.zeta_dot - half,
        coef_xk1=half,
        rhs=-cs.zeta_const,
    )


def implied_path_acceleration(x: np.ndarray, grid: np.ndarray, k: int) -> float:
    """s_ddot at knot k: forward difference, backward at the last knot"""
    if k < len(grid) - 1:
        return float((x[k + 1] - x[k]) / (2.0 * (grid[k + 1] - grid[k])))
    return float((x[k] - x[k - 1]) / (2.0 * (grid[k] - grid[k - 1])))


def nominal_weight_adjustment(forms: Sequence[WrenchAffineForm], g: GripperModel,
                              x_nominal: np.ndarray, grid: np.ndarray,
                              matrices: Optional[DistributionMatrices] = None,
                              condition_limit: float = SINGULAR_CONDITION_LIMIT) -> List[DistributionMap]:
    """
    Per-knot distribution maps with compressed weights on cups whose normal
    force at the nominal (x_k, s_ddot_k) crosses the compression threshold.
    """
    x_nominal = np.asarray(x_nominal, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if not (len(forms) == x_nominal.size == grid.size):
        raise DimensionMismatch(
            f"{len(forms)} wrench forms, {x_nominal.size} nominal values and {grid.size} grid points"
        )
    if np.any(x_nominal < 0.0):
        raise ValueError("nominal x must be non-negative")

    matrices = matrices or assemble_distribution_matrices(g)
    cache: Dict[Tuple[bool, ...], DistributionMap] = {}

    def map_for(flags: Tuple[bool, ...]) -> DistributionMap:
        if flags not in cache:
            cache[flags] = distribution_map(g, weights_for_flags(g, flags), matrices, condition_limit)
        return cache[flags]

    base = map_for(tuple([False] * g.n_cups))
    maps = []
    for k, form in enumerate(forms):
        tool_wrench = form.evaluate(x_nominal[k], implied_path_acceleration(x_nominal, grid, k))
        cup_wrenches = base.apply(tool_wrench).reshape(-1, 6)
        flags = tuple(compression_flags(cup_wrenches, g.weights))
        maps.append(map_for(flags))
    logger.debug(f"Weight adjustment used {len(cache)} distinct flag patterns over {len(forms)} knots")
    return maps


def constraint_margins(cs: ConstraintSet, sdot_sq: float, sddot: float) -> np.ndarray:
    """Slack of every row at (s_dot^2, s_ddot); negative means violated"""
    return -cs.evaluate(sdot_sq, sddot)
