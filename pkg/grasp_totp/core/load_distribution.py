"""
Minimum spring-energy load distribution across suction cups.

The QP  min f^T W f  s.t.  A f = F_t  has the closed form
f = W^-1 A^T (A W^-1 A^T)^-1 F_t, solved here through a Cholesky
factorization of A W^-1 A^T. The L1 baseline goes through the LP solver.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..exceptions import ConfigError, LpInfeasible, LpUnbounded, SingularSystem
from .gripper import (
    RING_POINT_COUNT,
    DistributionMatrices,
    GripperModel,
    StiffnessWeights,
    assemble_distribution_matrices,
)
from .lp_solver import LinearProgram, LpStatus, solve_lp
from .se3 import Wrench

logger = logging.getLogger(__name__)

SINGULAR_CONDITION_LIMIT = 1e12
SUPPORT_RELATIVE_THRESHOLD = 0.01


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Per-cup diagonal weights, repeated over the cup's four ring points"""
    per_cup: Tuple[Tuple[float, float, float], ...]

    def __post_init__(self):
        per_cup = tuple(tuple(float(v) for v in w) for w in self.per_cup)
        if any(len(w) != 3 for w in per_cup):
            raise ConfigError("each cup weight needs exactly 3 entries")
        if not per_cup or min(min(w) for w in per_cup) <= 0.0:
            raise ConfigError("all weight entries must be positive")
        object.__setattr__(self, "per_cup", per_cup)

    @classmethod
    def uniform(cls, n_cups: int, weights: Sequence[float]) -> "WeightMatrix":
        return cls(tuple(tuple(weights) for _ in range(n_cups)))

    @property
    def diagonal(self) -> np.ndarray:
        return np.concatenate([np.tile(w, RING_POINT_COUNT) for w in self.per_cup])

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.diagonal)


@dataclass(frozen=True, eq=False)
class LoadDistribution:
    per_cup_wrench: List[Wrench]
    ring_forces: np.ndarray
    weights_used: WeightMatrix
    compressed_flags: List[bool] = field(default_factory=list)

    @property
    def cup_wrench_matrix(self) -> np.ndarray:
        """N_s x 6 array of the cup wrenches"""
        return np.array([w.as_vector() for w in self.per_cup_wrench])

    @property
    def stacked_wrench(self) -> np.ndarray:
        return self.cup_wrench_matrix.reshape(-1)


@dataclass(frozen=True, eq=False)
class DistributionComparison:
    qp: LoadDistribution
    lp: LoadDistribution
    qp_l1: float
    lp_l1: float
    qp_energy: float
    lp_energy: float
    qp_support: int
    lp_support: int


def normal_weights(g: GripperModel) -> WeightMatrix:
    return WeightMatrix.uniform(g.n_cups, g.weights.normal)


def weights_for_flags(g: GripperModel, flags: Sequence[bool]) -> WeightMatrix:
    """Compressed weights on flagged cups, normal weights elsewhere"""
    if len(flags) != g.n_cups:
        raise ConfigError(f"expected {g.n_cups} flags, got {len(flags)}")
    return WeightMatrix(tuple(
        g.weights.compressed if flag else g.weights.normal for flag in flags
    ))


def compression_flags(cup_wrenches: np.ndarray, weights: StiffnessWeights) -> List[bool]:
    """Flag cups whose cup-frame normal force crosses the compression threshold"""
    return [bool(weights.is_compressed(fz)) for fz in np.asarray(cup_wrenches)[:, 5]]


def _factor(A: np.ndarray, w_inv: np.ndarray, condition_limit: float):
    M = (A * w_inv) @ A.T
    condition = np.linalg.cond(M)
    if not np.isfinite(condition) or condition > condition_limit:
        raise SingularSystem(f"A W^-1 A^T condition number {condition:.3g} exceeds {condition_limit:.3g}")
    return cho_factor(M)


def ring_force_operator(matrices: DistributionMatrices, weights: WeightMatrix,
                        condition_limit: float = SINGULAR_CONDITION_LIMIT) -> np.ndarray:
    """12N_s x 6 operator W^-1 A^T (A W^-1 A^T)^-1 mapping F_t to ring forces"""
    w_inv = 1.0 / weights.diagonal
    factor = _factor(matrices.A, w_inv, condition_limit)
    return w_inv[:, None] * (matrices.A.T @ cho_solve(factor, np.eye(6)))


def _as_distribution(ring_forces: np.ndarray, matrices: DistributionMatrices,
                     weights: WeightMatrix, flags: Sequence[bool]) -> LoadDistribution:
    cup_vectors = (matrices.A_s @ ring_forces).reshape(-1, 6)
    return LoadDistribution(
        per_cup_wrench=[Wrench.from_vector(v) for v in cup_vectors],
        ring_forces=ring_forces,
        weights_used=weights,
        compressed_flags=list(flags),
    )


def solve_distribution(F_t: Wrench, g: GripperModel, W: WeightMatrix,
                       matrices: Optional[DistributionMatrices] = None,
                       condition_limit: float = SINGULAR_CONDITION_LIMIT) -> LoadDistribution:
    """
    Minimum-energy ring forces reproducing the tool wrench.

    Args:
        F_t: tool wrench
        g: gripper
        W: weight matrix
        matrices: precomputed distribution matrices for g

    Returns:
        LoadDistribution with all compressed flags false

    Raises:
        SingularSystem: if A W^-1 A^T is ill conditioned
    """
    matrices = matrices or assemble_distribution_matrices(g)
    w_inv = 1.0 / W.diagonal
    factor = _factor(matrices.A, w_inv, condition_limit)
    ring_forces = w_inv * (matrices.A.T @ cho_solve(factor, F_t.as_vector()))
    return _as_distribution(ring_forces, matrices, W, [False] * g.n_cups)


def distribute_with_adjustment(F_t: Wrench, g: GripperModel,
                               matrices: Optional[DistributionMatrices] = None,
                               condition_limit: float = SINGULAR_CONDITION_LIMIT) -> LoadDistribution:
    """Solve with normal weights, switch flagged cups to compressed weights, re-solve once"""
    matrices = matrices or assemble_distribution_matrices(g)
    base = solve_distribution(F_t, g, normal_weights(g), matrices, condition_limit)
    flags = compression_flags(base.cup_wrench_matrix, g.weights)
    if not any(flags):
        return base

    logger.debug(f"Compressed cups: {[i for i, flag in enumerate(flags) if flag]}")
    adjusted = solve_distribution(F_t, g, weights_for_flags(g, flags), matrices, condition_limit)
    return _as_distribution(adjusted.ring_forces, matrices, adjusted.weights_used, flags)


def solve_lp_distribution(F_t: Wrench, g: GripperModel,
                          matrices: Optional[DistributionMatrices] = None,
                          method: str = "simplex") -> LoadDistribution:
    """
    Minimum L1 ring forces: min 1^T x s.t. A f = F_t, -f - x <= 0, f - x <= 0.
    """
    matrices = matrices or assemble_distribution_matrices(g)
    n = matrices.A.shape[1]
    identity = np.eye(n)
    lp = LinearProgram(
        objective=np.concatenate([np.zeros(n), np.ones(n)]),
        ineq_matrix=np.block([[-identity, -identity], [identity, -identity]]),
        ineq_rhs=np.zeros(2 * n),
        eq_matrix=np.hstack([matrices.A, np.zeros((6, n))]),
        eq_rhs=F_t.as_vector(),
        bounds=[(None, None)] * n + [(0.0, None)] * n,
    )
    solution = solve_lp(lp, method=method)
    if solution.status == LpStatus.INFEASIBLE:
        raise LpInfeasible("L1 distribution LP reported infeasible for a full-rank gripper")
    if solution.status == LpStatus.UNBOUNDED:
        raise LpUnbounded("L1 distribution LP reported unbounded")
    return _as_distribution(solution.x[:n], matrices, normal_weights(g), [False] * g.n_cups)


def support_size(ring_forces: np.ndarray, rel: float = SUPPORT_RELATIVE_THRESHOLD) -> int:
    """Number of ring-force components above rel * max |f|"""
    magnitudes = np.abs(np.asarray(ring_forces))
    peak = magnitudes.max(initial=0.0)
    if peak == 0.0:
        return 0
    return int(np.count_nonzero(magnitudes > rel * peak))


def compare_distributions(F_t: Wrench, g: GripperModel,
                          support_threshold: float = SUPPORT_RELATIVE_THRESHOLD) -> DistributionComparison:
    """QP vs L1 solutions for the same wrench, with norms and support sizes"""
    matrices = assemble_distribution_matrices(g)
    W = normal_weights(g)
    qp = solve_distribution(F_t, g, W, matrices)
    lp = solve_lp_distribution(F_t, g, matrices)
    w_diag = W.diagonal
    return DistributionComparison(
        qp=qp,
        lp=lp,
        qp_l1=float(np.abs(qp.ring_forces).sum()),
        lp_l1=float(np.abs(lp.ring_forces).sum()),
        qp_energy=float(qp.ring_forces @ (w_diag * qp.ring_forces)),
        lp_energy=float(lp.ring_forces @ (w_diag * lp.ring_forces)),
        qp_support=support_size(qp.ring_forces, support_threshold),
        lp_support=support_size(lp.ring_forces, support_threshold),
    )
