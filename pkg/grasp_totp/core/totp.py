"""
Time-optimal path parameterization with grasp-failure constraints.

Variables are x_k = s_dot_k^2 on the knots of a uniform grid over s in [0, 1].
The boundary values x_0 = x_N = 0 are substituted into the right-hand sides,
and the travel-time cost is linearized around a nominal x_bar. Each sequential
LP iteration works inside a trust box around x_bar.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config.settings import LpConfig, Settings
from ..exceptions import ConfigError, DimensionMismatch, LpInfeasible, LpUnbounded, StaticallyInfeasible
from .dynamics import GRAVITY, KinematicChain, ObjectModel, PathSpec, WrenchAffineForm, parameterize_wrench
from .grasp_constraints import (
    ConstraintSet,
    DistributionMap,
    RowLabel,
    discretize_constraints,
    distribution_map,
    grasp_constraint_coeffs,
    nominal_weight_adjustment,
)
from .gripper import GripperModel, assemble_distribution_matrices, slippage_block, suction_loss_blocks
from .load_distribution import SINGULAR_CONDITION_LIMIT, normal_weights
from .lp_solver import LinearProgram, LpStatus, solve_lp

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-6
STATIC_TOL = 1e-9
# relative to the current travel time
DESCENT_TOL = 1e-8
# trust-region acceptance and expansion, actual over predicted time decrease
ACCEPT_RATIO = 0.1
EXPAND_RATIO = 0.75
MAX_LOAD_CAP_KG = 1e6


@dataclass(frozen=True, eq=False)
class KinematicLimits:
    """Per-joint limits; any of them may be absent"""
    vel_max: Optional[np.ndarray] = None
    acc_max: Optional[np.ndarray] = None
    jerk_max: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("vel_max", "acc_max", "jerk_max"):
            value = getattr(self, name)
            if value is None:
                continue
            value = np.atleast_1d(np.asarray(value, dtype=float))
            if not np.all(np.isfinite(value)) or np.any(value < 0.0):
                raise ConfigError(f"{name} must be finite and non-negative", key=name)
            object.__setattr__(self, name, value)

    def check_joints(self, n_joints: int) -> None:
        for name in ("vel_max", "acc_max", "jerk_max"):
            value = getattr(self, name)
            if value is not None and value.size != n_joints:
                raise DimensionMismatch(f"{name} has {value.size} entries for {n_joints} joints")


@dataclass(eq=False)
class TotpProblem:
    path: PathSpec
    chain: KinematicChain
    object: Optional[ObjectModel]
    gripper: Optional[GripperModel]
    limits: KinematicLimits
    n_knots: int = 100
    epsilon: float = 1e-6
    max_iters: int = 50
    trust_radius: float = 0.5
    grasp_constraints_enabled: bool = True
    weight_adjustment_enabled: bool = True
    x_floor: float = 1e-6
    x_cap: float = 1e6
    lp_method: str = "simplex"
    gravity: float = GRAVITY
    jacobian_step: Optional[float] = None
    max_load_tolerance_kg: float = 1e-3
    condition_limit: float = SINGULAR_CONDITION_LIMIT
    lp_config: LpConfig = field(default_factory=LpConfig)

    def __post_init__(self):
        if self.n_knots < 2:
            raise ConfigError(f"n_knots must be at least 2, got {self.n_knots}", key="n_knots")
        if not self.epsilon > 0.0:
            raise ConfigError("epsilon must be positive", key="epsilon")
        if not self.trust_radius > 0.0:
            raise ConfigError("trust_radius must be positive", key="trust_radius")
        if self.path.n_joints != self.chain.n_joints:
            raise DimensionMismatch(f"path has {self.path.n_joints} joints, chain has {self.chain.n_joints}")
        self.limits.check_joints(self.chain.n_joints)
        if self.grasp_constraints_enabled and (self.gripper is None or self.object is None):
            raise ConfigError("grasp constraints need both a gripper and an object")

    @classmethod
    def from_settings(cls, path: PathSpec, chain: KinematicChain, obj: Optional[ObjectModel],
                      gripper: Optional[GripperModel], limits: KinematicLimits,
                      settings: Settings, **overrides) -> "TotpProblem":
        solver = settings.solver
        options = dict(
            n_knots=solver.n_knots,
            epsilon=solver.epsilon,
            max_iters=solver.max_iters,
            trust_radius=solver.trust_radius,
            grasp_constraints_enabled=solver.grasp_enabled,
            weight_adjustment_enabled=solver.weight_adjustment_enabled,
            x_floor=solver.x_floor,
            x_cap=solver.x_cap,
            lp_method=solver.lp_method,
            gravity=settings.gravity,
            jacobian_step=solver.jacobian_step,
            max_load_tolerance_kg=solver.max_load_tolerance_kg,
            condition_limit=settings.load_distribution.singular_condition_limit,
            lp_config=settings.lp,
        )
        options.update(overrides)
        return cls(path, chain, obj, gripper, limits, **options)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_knots + 1)

    @property
    def grasp_active(self) -> bool:
        return self.grasp_constraints_enabled and self.gripper is not None and self.object is not None

    def with_object(self, obj: ObjectModel) -> "TotpProblem":
        return replace(self, object=obj)


@dataclass(frozen=True, eq=False)
class RowBlock:
    """Rows  sum_j coef[:, j] * x[start + j] <= rhs, all attributed to one knot"""
    knot: int
    start: int
    coef: np.ndarray
    rhs: np.ndarray
    labels: List[RowLabel]

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Left-hand side values for the full x vector"""
        width = self.coef.shape[1] if self.coef.ndim == 2 else 0
        return self.coef @ np.asarray(x)[self.start:self.start + width]


def _empty_block(knot: int) -> RowBlock:
    return RowBlock(knot=knot, start=knot, coef=np.zeros((0, 1)), rhs=np.zeros(0), labels=[])


@dataclass(frozen=True, eq=False)
class StackedConstraints:
    """Every row over the full variable vector x_0..x_N"""
    matrix: np.ndarray
    rhs: np.ndarray
    labels: List[RowLabel]
    knots: np.ndarray

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    def margins(self, x: np.ndarray) -> np.ndarray:
        """rhs - A x; negative entries are violated"""
        return self.rhs - self.matrix @ np.asarray(x, dtype=float)

    def worst_row(self, x: np.ndarray) -> Tuple[int, float]:
        margins = self.margins(x)
        if margins.size == 0:
            return -1, np.inf
        index = int(np.argmin(margins))
        return index, float(margins[index])

    def knot_margins(self, x: np.ndarray, n_knots: int) -> Tuple[np.ndarray, List[str]]:
        """Smallest margin per knot and the label of the row attaining it"""
        margins = self.margins(x)
        per_knot = np.full(n_knots + 1, np.inf)
        labels = [""] * (n_knots + 1)
        for row, (knot, margin) in enumerate(zip(self.knots, margins)):
            if margin < per_knot[knot]:
                per_knot[knot] = margin
                labels[knot] = str(self.labels[row])
        return per_knot, labels


@dataclass(frozen=True, eq=False)
class TrajectoryCheck:
    margins: np.ndarray
    min_margin: float
    active_row_label: str
    active_knot: int
    knot_margins: np.ndarray
    knot_labels: List[str]

    @property
    def feasible(self) -> bool:
        return self.min_margin >= -FEASIBILITY_TOL


@dataclass(eq=False)
class TotpSolution:
    x: np.ndarray
    timestamps: np.ndarray
    total_time: float
    margins: np.ndarray
    iterations: int
    converged: bool
    min_margin: float = np.inf
    active_row_label: str = ""
    knot_margins: np.ndarray = field(default_factory=lambda: np.zeros(0))
    knot_labels: List[str] = field(default_factory=list)
    restorations: int = 0

    @property
    def sdot(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.x, 0.0))


@dataclass(frozen=True)
class MaxLoadResult:
    max_load_kg: float
    active_row_label: str


class PredictionLabel(str, Enum):
    TRUE_POSITIVE = "TP"
    TRUE_NEGATIVE = "TN"
    FALSE_NEGATIVE = "FN"
    FALSE_POSITIVE = "FP"


@dataclass(frozen=True)
class PredictionMetrics:
    counts: Dict[str, int]
    true_negative_rate: float
    false_alarm_rate: float


def path_deltas(grid: np.ndarray) -> np.ndarray:
    deltas = np.diff(np.asarray(grid, dtype=float))
    if np.any(deltas <= 0.0):
        raise ConfigError("grid must be strictly increasing")
    return deltas


def first_order_rows(path: PathSpec, limits: KinematicLimits, grid: np.ndarray, k: int) -> RowBlock:
    """(q'_j(s_k))^2 x_k <= vel_max_j^2 per joint"""
    if limits.vel_max is None:
        return _empty_block(k)
    dq = path.dq(grid[k])
    labels = [RowLabel("velocity", row=0, joint=j) for j in range(dq.size)]
    return RowBlock(knot=k, start=k, coef=(dq ** 2)[:, None], rhs=limits.vel_max ** 2, labels=labels)


def second_order_rows(path: PathSpec, limits: KinematicLimits, grid: np.ndarray, k: int) -> RowBlock:
    """+-(q'' x_k + q' (x_{k+1} - x_k) / (2 delta_k)) <= acc_max per joint"""
    if limits.acc_max is None or k >= len(grid) - 1:
        return _empty_block(k)
    delta = grid[k + 1] - grid[k]
    dq = path.dq(grid[k])
    ddq = path.ddq(grid[k])
    half = dq / (2.0 * delta)
    base = np.column_stack([ddq - half, half])
    coef = np.vstack([base, -base])
    rhs = np.concatenate([limits.acc_max, limits.acc_max])
    labels = [RowLabel("acceleration", row=sign, joint=j) for sign in (0, 1) for j in range(dq.size)]
    return RowBlock(knot=k, start=k, coef=coef, rhs=rhs, labels=labels)


def third_order_rows(path: PathSpec, limits: KinematicLimits, grid: np.ndarray, k: int,
                     x_nominal: np.ndarray) -> RowBlock:
    """
    Jerk q''' s_dot^3 + 3 q'' s_dot s_ddot + q' s_dddot over (x_k, x_{k+1}, x_{k+2}).

    s_dddot is the difference of consecutive forward s_ddot values over the
    cell time 2 delta_k / (sqrt(x_k) + sqrt(x_{k+1})); every sqrt(x) factor is
    frozen at the nominal.
    """
    if limits.jerk_max is None or k >= len(grid) - 2:
        return _empty_block(k)
    x_nominal = np.maximum(np.asarray(x_nominal, dtype=float), 0.0)
    delta0 = grid[k + 1] - grid[k]
    delta1 = grid[k + 2] - grid[k + 1]
    root_k = np.sqrt(x_nominal[k])
    sigma = (root_k + np.sqrt(x_nominal[k + 1])) / (2.0 * delta0)
    dq = path.dq(grid[k])
    ddq = path.ddq(grid[k])
    dddq = path.dddq(grid[k])

    gamma0 = dddq * root_k - 3.0 * ddq * root_k / (2.0 * delta0) + dq * sigma / (2.0 * delta0)
    gamma1 = 3.0 * ddq * root_k / (2.0 * delta0) - dq * sigma * (1.0 / (2.0 * delta1) + 1.0 / (2.0 * delta0))
    gamma2 = dq * sigma / (2.0 * delta1)
    base = np.column_stack([gamma0, gamma1, gamma2])
    coef = np.vstack([base, -base])
    rhs = np.concatenate([limits.jerk_max, limits.jerk_max])
    labels = [RowLabel("jerk", row=sign, joint=j) for sign in (0, 1) for j in range(dq.size)]
    return RowBlock(knot=k, start=k, coef=coef, rhs=rhs, labels=labels)


def grasp_rows(cs: ConstraintSet, grid: np.ndarray, k: int) -> RowBlock:
    """Discretized grasp rows at knot k; the last knot uses the backward s_ddot"""
    n = len(grid) - 1
    if k < n:
        rows = discretize_constraints(cs, grid[k + 1] - grid[k])
        return RowBlock(knot=k, start=k, coef=np.column_stack([rows.coef_xk, rows.coef_xk1]),
                        rhs=rows.rhs, labels=list(cs.row_labels))
    half = cs.zeta_ddot / (2.0 * (grid[n] - grid[n - 1]))
    return RowBlock(knot=n, start=n - 1, coef=np.column_stack([-half, cs.zeta_dot + half]),
                    rhs=-cs.zeta_const, labels=list(cs.row_labels))


def stack_blocks(blocks: Sequence[RowBlock], n_vars: int) -> StackedConstraints:
    n_rows = sum(block.n_rows for block in blocks)
    matrix = np.zeros((n_rows, n_vars))
    rhs = np.zeros(n_rows)
    knots = np.zeros(n_rows, dtype=int)
    labels: List[RowLabel] = []
    row = 0
    for block in blocks:
        if block.n_rows == 0:
            continue
        width = block.coef.shape[1]
        matrix[row:row + block.n_rows, block.start:block.start + width] = block.coef
        rhs[row:row + block.n_rows] = block.rhs
        knots[row:row + block.n_rows] = block.knot
        labels.extend(block.labels)
        row += block.n_rows
    return StackedConstraints(matrix=matrix, rhs=rhs, labels=labels, knots=knots)


def travel_time(x: np.ndarray, grid: np.ndarray) -> float:
    """Sum of 2 delta_k / (sqrt(x_k) + sqrt(x_{k+1})); infinite if some cell is never left"""
    roots = np.sqrt(np.maximum(np.asarray(x, dtype=float), 0.0))
    denominators = roots[:-1] + roots[1:]
    if np.any(denominators <= 0.0):
        return np.inf
    return float(np.sum(2.0 * path_deltas(grid) / denominators))


def reconstruct_timestamps(x: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """t_0 = 0, t_{k+1} = t_k + 2 delta_k / (sqrt(x_k) + sqrt(x_{k+1}))"""
    roots = np.sqrt(np.maximum(np.asarray(x, dtype=float), 0.0))
    denominators = roots[:-1] + roots[1:]
    with np.errstate(divide="ignore"):
        steps = np.where(denominators > 0.0, 2.0 * path_deltas(grid) / denominators, np.inf)
    return np.concatenate([[0.0], np.cumsum(steps)])


def linearized_cost(x_nominal: np.ndarray, grid: np.ndarray, x_floor: float = 1e-6) -> np.ndarray:
    """
    Gradient of f(x) = sum delta_k / (sqrt(x_k) + sqrt(x_{k+1})) at the nominal.

    Interior entries use max(x_bar_k, x_floor); boundary entries are zero.
    """
    x = np.asarray(x_nominal, dtype=float).copy()
    deltas = path_deltas(grid)
    x[1:-1] = np.maximum(x[1:-1], x_floor)
    x[0] = x[-1] = 0.0
    roots = np.sqrt(x)
    sums = roots[:-1] + roots[1:]
    gradient = np.zeros_like(x)
    interior = np.arange(1, x.size - 1)
    gradient[interior] = (
        -deltas[interior - 1] / (2.0 * roots[interior] * sums[interior - 1] ** 2)
        - deltas[interior] / (2.0 * roots[interior] * sums[interior] ** 2)
    )
    return gradient


class _PlanningData:
    """Per-problem quantities that do not depend on the nominal"""

    def __init__(self, problem: TotpProblem, forms: Optional[List[WrenchAffineForm]] = None):
        self.problem = problem
        self.grid = problem.grid
        self.n_knots = problem.n_knots
        self.forms: List[WrenchAffineForm] = []
        if problem.grasp_active:
            g = problem.gripper
            self.matrices = assemble_distribution_matrices(g)
            self.loss = suction_loss_blocks(g)
            self.slip = slippage_block(g)
            self.normal_map = distribution_map(g, normal_weights(g), self.matrices, problem.condition_limit)
            self.forms = forms if forms is not None else [
                parameterize_wrench(problem.chain, problem.path, problem.object, s,
                                    problem.gravity, problem.jacobian_step)
                for s in self.grid
            ]
        self.kinematic_blocks = [
            block
            for k in range(self.n_knots + 1)
            for block in (
                first_order_rows(problem.path, problem.limits, self.grid, k),
                second_order_rows(problem.path, problem.limits, self.grid, k),
            )
        ]

    def distribution_maps(self, x_nominal: np.ndarray) -> List[DistributionMap]:
        if self.problem.weight_adjustment_enabled:
            return nominal_weight_adjustment(self.forms, self.problem.gripper, x_nominal, self.grid,
                                             self.matrices, self.problem.condition_limit)
        return [self.normal_map] * len(self.forms)

    def grasp_sets(self, x_nominal: np.ndarray) -> List[ConstraintSet]:
        maps = self.distribution_maps(x_nominal)
        return [
            grasp_constraint_coeffs(form, self.problem.gripper, dmap, self.loss, self.slip)
            for form, dmap in zip(self.forms, maps)
        ]

    def assemble(self, x_nominal: np.ndarray) -> StackedConstraints:
        blocks = list(self.kinematic_blocks)
        blocks.extend(
            third_order_rows(self.problem.path, self.problem.limits, self.grid, k, x_nominal)
            for k in range(self.n_knots - 1)
        )
        if self.forms:
            blocks.extend(grasp_rows(cs, self.grid, k) for k, cs in enumerate(self.grasp_sets(x_nominal)))
        return stack_blocks(blocks, self.n_knots + 1)


def assemble_constraints(problem: TotpProblem, x_nominal: np.ndarray) -> StackedConstraints:
    """Full stacked system over x_0..x_N, jerk rows and weight adjustment taken at the nominal"""
    return _PlanningData(problem).assemble(np.asarray(x_nominal, dtype=float))


@dataclass(eq=False)
class ReducedProgram:
    """LP over a subset of variables; rows index into the stacked constraints"""
    lp: LinearProgram
    columns: np.ndarray
    rows: np.ndarray

    def expand(self, x_reduced: np.ndarray, n_vars: int) -> np.ndarray:
        x = np.zeros(n_vars)
        x[self.columns] = x_reduced
        return x


def _bound_pairs(lower: np.ndarray, upper: np.ndarray) -> List[Tuple[Optional[float], Optional[float]]]:
    return [
        (None if np.isinf(lo) else float(lo), None if np.isinf(hi) else float(hi))
        for lo, hi in zip(lower, upper)
    ]


def to_linear_program(stack: StackedConstraints, cost: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                      eliminate_boundary: bool = True) -> ReducedProgram:
    """
    Build the LP  min cost^T x  s.t. stacked rows, lower <= x <= upper.

    With ``eliminate_boundary`` the boundary columns are substituted by
    x_0 = x_N = 0, single-variable rows are folded into bounds and rows that
    cannot bind inside the box are dropped. Otherwise every variable is kept
    and x_0 = x_N = 0 are explicit equalities.

    Raises:
        LpInfeasible: if folded bounds conflict
    """
    n_vars = stack.matrix.shape[1]
    cost = np.asarray(cost, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)

    if not eliminate_boundary:
        pins = np.zeros((2, n_vars))
        pins[0, 0] = pins[1, -1] = 1.0
        lp = LinearProgram(cost, stack.matrix, stack.rhs, pins, np.zeros(2), _bound_pairs(lower, upper))
        return ReducedProgram(lp=lp, columns=np.arange(n_vars), rows=np.arange(stack.n_rows))

    columns = np.arange(1, n_vars - 1)
    boundary = np.array([0, n_vars - 1])
    A = stack.matrix[:, columns]
    b = stack.rhs - stack.matrix[:, boundary] @ np.zeros(2)
    lo = lower[columns].copy()
    hi = upper[columns].copy()

    nonzero = A != 0.0
    counts = nonzero.sum(axis=1)
    keep = np.ones(stack.n_rows, dtype=bool)

    empty = counts == 0
    keep[empty & (b >= 0.0)] = False

    for row in np.flatnonzero(counts == 1):
        j = int(np.flatnonzero(nonzero[row])[0])
        a = A[row, j]
        if a > 0.0:
            hi[j] = min(hi[j], b[row] / a)
        else:
            lo[j] = max(lo[j], b[row] / a)
        keep[row] = False
        if lo[j] > hi[j] + FEASIBILITY_TOL * max(1.0, abs(hi[j])):
            raise LpInfeasible("variable bounds conflict", knot=int(columns[j]),
                               row_label=str(stack.labels[row]))
        if lo[j] > hi[j]:
            hi[j] = lo[j]

    with np.errstate(invalid="ignore"):
        row_max = np.where(A > 0.0, A * hi, np.where(A < 0.0, A * lo, 0.0)).sum(axis=1)
    keep &= ~(np.isfinite(row_max) & (row_max <= b))

    rows = np.flatnonzero(keep)
    logger.debug(f"Presolve kept {rows.size} of {stack.n_rows} rows over {columns.size} variables")
    lp = LinearProgram(cost[columns], A[rows], b[rows], bounds=_bound_pairs(lo, hi))
    return ReducedProgram(lp=lp, columns=columns, rows=rows)


def initial_nominal(problem: TotpProblem, stack: Optional[StackedConstraints] = None) -> np.ndarray:
    """
    Greedy forward/backward pass over the velocity and acceleration rows only,
    floored at x_floor on interior knots.
    """
    data = stack if stack is not None else stack_blocks(
        _PlanningData(_without_grasp(problem)).kinematic_blocks, problem.n_knots + 1
    )
    n = problem.n_knots
    caps = np.full(n + 1, problem.x_cap)
    cell_rows: List[List[Tuple[float, float, float]]] = [[] for _ in range(n)]
    for row in range(data.n_rows):
        support = np.flatnonzero(data.matrix[row])
        b = data.rhs[row]
        if support.size == 1:
            j = int(support[0])
            a = data.matrix[row, j]
            if a > 0.0:
                caps[j] = min(caps[j], b / a)
        elif support.size == 2 and support[1] == support[0] + 1:
            k = int(support[0])
            cell_rows[k].append((data.matrix[row, k], data.matrix[row, k + 1], b))
    caps = np.maximum(caps, 0.0)

    forward = np.zeros(n + 1)
    for k in range(n):
        bound = caps[k + 1]
        for a0, a1, b in cell_rows[k]:
            if a1 > 0.0:
                bound = min(bound, (b - a0 * forward[k]) / a1)
        forward[k + 1] = max(bound, 0.0)
    forward[n] = 0.0

    x = forward.copy()
    for k in range(n - 1, -1, -1):
        bound = x[k]
        for a0, a1, b in cell_rows[k]:
            if a0 > 0.0:
                bound = min(bound, (b - a1 * x[k + 1]) / a0)
        x[k] = max(bound, 0.0)
    x[0] = 0.0
    x[1:n] = np.maximum(x[1:n], problem.x_floor)
    return x


def _without_grasp(problem: TotpProblem) -> TotpProblem:
    return replace(problem, grasp_constraints_enabled=False)


def _static_check(data: _PlanningData) -> None:
    """Raise StaticallyInfeasible if some knot cannot hold the object at rest"""
    if not data.forms:
        return
    for k, cs in enumerate(data.grasp_sets(np.zeros(data.n_knots + 1))):
        margins = -cs.zeta_const
        row = int(np.argmin(margins))
        if margins[row] < -STATIC_TOL:
            raise StaticallyInfeasible(k, str(cs.row_labels[row]), float(margins[row]))


def _check(stack: StackedConstraints, x: np.ndarray, n_knots: int) -> TrajectoryCheck:
    margins = stack.margins(x)
    knot_margins, knot_labels = stack.knot_margins(x, n_knots)
    if margins.size == 0:
        return TrajectoryCheck(margins, np.inf, "", -1, knot_margins, knot_labels)
    row = int(np.argmin(margins))
    return TrajectoryCheck(
        margins=margins,
        min_margin=float(margins[row]),
        active_row_label=str(stack.labels[row]),
        active_knot=int(stack.knots[row]),
        knot_margins=knot_margins,
        knot_labels=knot_labels,
    )


def check_trajectory(problem: TotpProblem, x: np.ndarray) -> TrajectoryCheck:
    """Re-verify every stacked row at x by direct multiplication"""
    x = np.asarray(x, dtype=float)
    if x.size != problem.n_knots + 1:
        raise DimensionMismatch(f"expected {problem.n_knots + 1} values of x, got {x.size}")
    stack = _PlanningData(problem).assemble(x)
    return _check(stack, x, problem.n_knots)


class SequentialLpSolver:
    """Trust-region sequential LP over x_1..x_{N-1}"""

    def __init__(self, problem: TotpProblem):
        self.problem = problem
        self.data = _PlanningData(problem)
        self.grid = self.data.grid
        self.n_vars = problem.n_knots + 1
        self.restorations = 0

    def _box(self, x_bar: np.ndarray, rho: float, restore: bool) -> Tuple[np.ndarray, np.ndarray]:
        p = self.problem
        radius = rho * np.maximum(x_bar, p.x_floor)
        lower = np.zeros(self.n_vars) if restore else np.maximum(0.0, x_bar - radius)
        upper = np.minimum(p.x_cap, x_bar + radius)
        lower[0] = lower[-1] = 0.0
        upper[0] = upper[-1] = 0.0
        return lower, upper

    def _radius(self, x_bar: np.ndarray, rho: float) -> float:
        """Largest half-width of the interior trust box"""
        return float(np.max(rho * np.maximum(x_bar[1:-1], self.problem.x_floor)))

    def _solve_step(self, stack: StackedConstraints, x_bar: np.ndarray, rho: float,
                    restore: bool) -> Optional[np.ndarray]:
        p = self.problem
        cost = linearized_cost(x_bar, self.grid, p.x_floor)
        lower, upper = self._box(x_bar, rho, restore)
        try:
            reduced = to_linear_program(stack, cost, lower, upper)
        except LpInfeasible:
            return None
        solution = solve_lp(reduced.lp, method=p.lp_method, config=p.lp_config)
        if solution.status == LpStatus.INFEASIBLE:
            return None
        if solution.status == LpStatus.UNBOUNDED:
            raise LpUnbounded("trust-region LP reported unbounded")
        logger.debug(f"LP solved in {solution.iterations} iterations")
        return reduced.expand(solution.x, self.n_vars)

    def step(self, stack: StackedConstraints, x_bar: np.ndarray, rho: float) -> np.ndarray:
        x_new = self._solve_step(stack, x_bar, rho, restore=False)
        if x_new is not None:
            return x_new
        self.restorations += 1
        logger.info("Trust-region LP infeasible, relaxing the lower box to zero")
        x_new = self._solve_step(stack, x_bar, rho, restore=True)
        if x_new is None:
            row, margin = stack.worst_row(x_bar)
            knot = int(stack.knots[row]) if row >= 0 else None
            label = str(stack.labels[row]) if row >= 0 else None
            raise LpInfeasible(f"planning LP infeasible (nominal margin {margin:.6g})", knot, label)
        return x_new

    def solve(self) -> TotpSolution:
        p = self.problem
        _static_check(self.data)

        x_bar = initial_nominal(p)
        stack_bar = self.data.assemble(x_bar)
        time_bar = travel_time(x_bar, self.grid)
        feasible_bar = _check(stack_bar, x_bar, p.n_knots).feasible
        best: Optional[Tuple[np.ndarray, float]] = (x_bar, time_bar) if feasible_bar else None
        rho = p.trust_radius
        converged = False
        iterations = 0

        for iterations in range(1, p.max_iters + 1):
            x_new = self.step(stack_bar, x_bar, rho)
            change = float(np.max(np.abs(x_new - x_bar)))
            stack_new = self.data.assemble(x_new)
            time_new = travel_time(x_new, self.grid)
            feasible_new = _check(stack_new, x_new, p.n_knots).feasible
            logger.info(
                f"SLP iteration {iterations}: time {time_new:.6g} s, step {change:.3g}, radius {rho:.3g}"
            )

            if change < p.epsilon:
                x_bar, stack_bar, time_bar = x_new, stack_new, time_new
                converged = True
                break

            if feasible_bar and np.isfinite(time_bar):
                # travel_time is twice the linearized objective
                cost = linearized_cost(x_bar, self.grid, p.x_floor)
                predicted = 2.0 * float(cost @ (x_bar - x_new))
                actual = time_bar - time_new
                if predicted <= DESCENT_TOL * time_bar:
                    logger.info(f"Predicted decrease {predicted:.3g} s below tolerance, stopping")
                    converged = True
                    break
                if not feasible_new or actual < ACCEPT_RATIO * predicted:
                    rho *= 0.5
                    logger.info(f"Rejected step (gain {actual:.3g} of {predicted:.3g} s), radius {rho:.3g}")
                    if self._radius(x_bar, rho) < p.epsilon:
                        converged = True
                        break
                    continue
                if actual > EXPAND_RATIO * predicted:
                    rho = min(2.0 * rho, p.trust_radius)

            x_bar, stack_bar, time_bar, feasible_bar = x_new, stack_new, time_new, feasible_new
            if feasible_new and (best is None or time_new <= best[1]):
                best = (x_new, time_new)

        if not converged:
            logger.warning(f"SLP did not converge within {p.max_iters} iterations")
            if best is not None:
                x_bar = best[0]
                stack_bar = self.data.assemble(x_bar)

        return self._solution(x_bar, stack_bar, iterations, converged)

    def _solution(self, x: np.ndarray, stack: StackedConstraints, iterations: int,
                  converged: bool) -> TotpSolution:
        p = self.problem
        check = _check(stack, x, p.n_knots)
        timestamps = reconstruct_timestamps(x, self.grid)
        total_time = float(timestamps[-1])
        if converged and not np.isfinite(total_time):
            logger.warning("Path cannot be traversed: zero speed inside the path")
            converged = False
        if converged and not check.feasible:
            logger.warning(f"Converged point violates {check.active_row_label} by {-check.min_margin:.3g}")
            converged = False
        return TotpSolution(
            x=x,
            timestamps=timestamps,
            total_time=total_time,
            margins=check.margins,
            iterations=iterations,
            converged=converged,
            min_margin=check.min_margin,
            active_row_label=check.active_row_label,
            knot_margins=check.knot_margins,
            knot_labels=check.knot_labels,
            restorations=self.restorations,
        )


def solve_totp(problem: TotpProblem) -> TotpSolution:
    """
    Time-optimal parameterization of the problem's path.

    Returns:
        TotpSolution; ``converged`` is false when the iteration cap is hit
        (best feasible iterate returned) or the path cannot be traversed

    Raises:
        StaticallyInfeasible: if the object cannot be held at rest at some knot
        LpInfeasible: if even the relaxed trust-region LP has no solution
    """
    logger.info(
        f"Planning over {problem.n_knots} cells "
        f"({'with' if problem.grasp_active else 'without'} grasp constraints)"
    )
    solution = SequentialLpSolver(problem).solve()
    logger.info(
        f"Total time {solution.total_time:.6g} s after {solution.iterations} iterations "
        f"(converged: {solution.converged})"
    )
    return solution


def time_extension(time_without: float, time_with: float) -> float:
    """Relative increase of the travel time caused by grasp constraints, in percent"""
    return 100.0 * (time_with - time_without) / time_without


def max_load_search(problem: TotpProblem, fixed_x: np.ndarray) -> MaxLoadResult:
    """
    Largest object mass whose grasp rows hold along fixed_x.

    The object keeps its shape: inertia scales with mass. Only the wrenches
    along fixed_x are checked; pass zeros for the holding capacity at rest.
    """
    if problem.gripper is None or problem.object is None:
        raise ConfigError("max-load search needs a gripper and an object")
    fixed_x = np.asarray(fixed_x, dtype=float)
    if fixed_x.size != problem.n_knots + 1:
        raise DimensionMismatch(f"expected {problem.n_knots + 1} values of x, got {fixed_x.size}")

    unit_problem = replace(problem, object=problem.object.with_mass(1.0), grasp_constraints_enabled=True)
    unit_forms = _PlanningData(unit_problem).forms
    grid = problem.grid
    tolerance = problem.max_load_tolerance_kg

    def worst(mass: float) -> Tuple[float, str]:
        data = _PlanningData(unit_problem, forms=[form.scaled(mass) for form in unit_forms])
        margin, label = np.inf, ""
        for k, cs in enumerate(data.grasp_sets(fixed_x)):
            block = grasp_rows(cs, grid, k)
            margins = block.rhs - block.evaluate(fixed_x)
            row = int(np.argmin(margins))
            if margins[row] < margin:
                margin, label = float(margins[row]), str(block.labels[row])
        return margin, label

    def holds(mass: float) -> bool:
        return worst(mass)[0] >= -STATIC_TOL

    if not holds(tolerance):
        return MaxLoadResult(0.0, worst(tolerance)[1])

    lo, hi = tolerance, max(1.0, 2.0 * tolerance)
    while holds(hi):
        lo, hi = hi, 2.0 * hi
        if hi > MAX_LOAD_CAP_KG:
            logger.warning(f"Max load exceeds {MAX_LOAD_CAP_KG:g} kg; stopping the search")
            return MaxLoadResult(lo, "")
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    label = worst(hi)[1]
    logger.info(f"Max load {lo:.4f} kg, limited by {label}")
    return MaxLoadResult(lo, label)


def classify_prediction(grasp_succeeded: bool, estimated_max_load: float,
                        actual_weight: float) -> PredictionLabel:
    """Confusion label of a max-load prediction against an observed grasp outcome"""
    predicted_hold = estimated_max_load >= actual_weight
    if grasp_succeeded:
        return PredictionLabel.TRUE_POSITIVE if predicted_hold else PredictionLabel.FALSE_NEGATIVE
    return PredictionLabel.FALSE_POSITIVE if predicted_hold else PredictionLabel.TRUE_NEGATIVE


def prediction_metrics(labels: Sequence[PredictionLabel]) -> PredictionMetrics:
    """Counts, TNR = TN / (TN + FP) and false alarm rate FAR = FN / (TP + FN)"""
    counts = {label.value: 0 for label in PredictionLabel}
    for label in labels:
        counts[PredictionLabel(label).value] += 1
    negatives = counts["TN"] + counts["FP"]
    positives = counts["TP"] + counts["FN"]
    return PredictionMetrics(
        counts=counts,
        true_negative_rate=counts["TN"] / negatives if negatives else float("nan"),
        false_alarm_rate=counts["FN"] / positives if positives else float("nan"),
    )
