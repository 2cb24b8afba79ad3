"""
Dense bounded-variable two-phase simplex.

Solves   min c^T x   s.t.  A x <= b,  E x = d,  lo <= x <= hi.

Variables are shifted/mirrored/split so that every working variable lives in
[0, u] (u possibly infinite); inequality rows receive slacks, rows with a
negative right-hand side are negated and every row is equilibrated. Phase 1
minimizes the sum of artificials, phase 2 the original objective. Pricing is
Dantzig's rule, switching to Bland's rule once the iteration count passes
``bland_after_factor * (m + n)``.

``method="highs"`` dispatches to scipy.optimize.linprog for large problems.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from ..config.settings import LpConfig
from ..exceptions import DimensionMismatch, NumericalFailure

logger = logging.getLogger(__name__)

Bound = Tuple[Optional[float], Optional[float]]


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


def _matrix(values, n: int, name: str) -> np.ndarray:
    if values is None:
        return np.zeros((0, n))
    matrix = np.atleast_2d(np.asarray(values, dtype=float))
    if matrix.size == 0:
        return np.zeros((0, n))
    if matrix.shape[1] != n:
        raise DimensionMismatch(f"{name} has {matrix.shape[1]} columns, expected {n}")
    return matrix


def _vector(values, m: int, name: str) -> np.ndarray:
    if values is None:
        vector = np.zeros(0)
    else:
        vector = np.asarray(values, dtype=float).reshape(-1)
    if vector.shape != (m,):
        raise DimensionMismatch(f"{name} has length {vector.size}, expected {m}")
    return vector


@dataclass(eq=False)
class LinearProgram:
    """
    min objective^T x  s.t.  ineq_matrix x <= ineq_rhs, eq_matrix x = eq_rhs.

    bounds follows scipy.optimize.linprog: None means every variable in
    [0, inf); a single (lo, hi) pair applies to all variables; otherwise one
    pair per variable, where None on a side means unbounded on that side.
    """
    objective: np.ndarray
    ineq_matrix: Optional[np.ndarray] = None
    ineq_rhs: Optional[np.ndarray] = None
    eq_matrix: Optional[np.ndarray] = None
    eq_rhs: Optional[np.ndarray] = None
    bounds: Optional[Sequence[Bound]] = None
    lower: np.ndarray = field(init=False)
    upper: np.ndarray = field(init=False)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).reshape(-1)
        n = self.objective.size
        self.ineq_matrix = _matrix(self.ineq_matrix, n, "ineq_matrix")
        self.ineq_rhs = _vector(self.ineq_rhs, self.ineq_matrix.shape[0], "ineq_rhs")
        self.eq_matrix = _matrix(self.eq_matrix, n, "eq_matrix")
        self.eq_rhs = _vector(self.eq_rhs, self.eq_matrix.shape[0], "eq_rhs")

        for name in ("objective", "ineq_matrix", "ineq_rhs", "eq_matrix", "eq_rhs"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericalFailure(f"{name} has non-finite coefficients")

        bounds = self.bounds
        if bounds is None:
            bounds = [(0.0, None)] * n
        elif len(bounds) == 2 and all(b is None or np.isscalar(b) for b in bounds):
            bounds = [tuple(bounds)] * n
        if len(bounds) != n:
            raise DimensionMismatch(f"bounds has {len(bounds)} entries, expected {n}")
        self.lower = np.array([-np.inf if lo is None else float(lo) for lo, _ in bounds])
        self.upper = np.array([np.inf if hi is None else float(hi) for _, hi in bounds])
        if np.any(self.lower > self.upper):
            bad = int(np.argmax(self.lower > self.upper))
            raise DimensionMismatch(f"variable {bad} has lower bound above upper bound")

    @property
    def n(self) -> int:
        return self.objective.size

    @property
    def m(self) -> int:
        return self.ineq_matrix.shape[0]

    @property
    def p(self) -> int:
        return self.eq_matrix.shape[0]


@dataclass(eq=False)
class LpSolution:
    x: np.ndarray
    objective_value: float
    status: LpStatus
    ineq_duals: Optional[np.ndarray] = None
    eq_duals: Optional[np.ndarray] = None
    iterations: int = 0


class _StandardForm:
    """Working variables z in [0, upper], rows A z = b with b >= 0, row max-norm 1"""

    def __init__(self, lp: LinearProgram):
        n = lp.n
        columns: List[Tuple[int, float]] = []
        upper: List[float] = []
        self.offset = np.zeros(n)
        for j in range(n):
            lo, hi = lp.lower[j], lp.upper[j]
            if np.isfinite(lo):
                self.offset[j] = lo
                columns.append((j, 1.0))
                upper.append(hi - lo)
            elif np.isfinite(hi):
                self.offset[j] = hi
                columns.append((j, -1.0))
                upper.append(np.inf)
            else:
                columns.append((j, 1.0))
                upper.append(np.inf)
                columns.append((j, -1.0))
                upper.append(np.inf)

        self.n_struct = len(columns)
        self.transform = np.zeros((n, self.n_struct))
        for k, (j, sign) in enumerate(columns):
            self.transform[j, k] = sign

        m_ub, p = lp.m, lp.p
        self.m_ub = m_ub
        self.n_rows = m_ub + p
        self.n_cols = self.n_struct + m_ub

        A = np.zeros((self.n_rows, self.n_cols))
        A[:m_ub, :self.n_struct] = lp.ineq_matrix @ self.transform
        A[m_ub:, :self.n_struct] = lp.eq_matrix @ self.transform
        b = np.concatenate([
            lp.ineq_rhs - lp.ineq_matrix @ self.offset,
            lp.eq_rhs - lp.eq_matrix @ self.offset,
        ])

        self.sign = np.where(b < 0.0, -1.0, 1.0)
        A *= self.sign[:, None]
        b *= self.sign
        self.scale = np.max(np.abs(A[:, :self.n_struct]), axis=1, initial=0.0)
        self.scale[self.scale == 0.0] = 1.0
        A /= self.scale[:, None]
        b /= self.scale
        # slack columns stay unit (the slack variable absorbs the row scale)
        A[np.arange(m_ub), self.n_struct + np.arange(m_ub)] = self.sign[:m_ub]

        self.A = A
        self.b = b
        self.upper = np.concatenate([upper, np.full(m_ub, np.inf)])
        self.cost = np.concatenate([self.transform.T @ lp.objective, np.zeros(m_ub)])

    def to_original(self, z: np.ndarray) -> np.ndarray:
        return self.offset + self.transform @ z[:self.n_struct]


class _BoundedSimplex:
    """Tableau simplex over a _StandardForm; nonbasic variables sit at 0 or at their upper bound"""

    def __init__(self, form: _StandardForm, config: LpConfig):
        self.form = form
        self.config = config
        self.iterations = 0
        size = form.n_rows + form.n_cols
        self.bland_after = config.bland_after_factor * size
        self.iteration_cap = config.iteration_cap_factor * size

    def solve(self) -> Tuple[LpStatus, Optional[np.ndarray], Optional[np.ndarray], np.ndarray]:
        form = self.form
        m, n = form.n_rows, form.n_cols

        is_slack_row = np.zeros(m, dtype=bool)
        is_slack_row[:form.m_ub] = form.sign[:form.m_ub] > 0
        slack_rows = np.flatnonzero(is_slack_row)
        art_rows = np.flatnonzero(~is_slack_row)
        n_art = len(art_rows)

        self.tab = np.zeros((m, n + n_art))
        self.tab[:, :n] = form.A
        self.tab[art_rows, n + np.arange(n_art)] = 1.0
        self.beta = form.b.copy()
        self.basis = np.empty(m, dtype=int)
        self.basis[slack_rows] = form.n_struct + slack_rows
        self.basis[art_rows] = n + np.arange(n_art)
        self.upper = np.concatenate([form.upper, np.full(n_art, np.inf)])
        self.at_upper = np.zeros(n + n_art, dtype=bool)
        self.rows = np.arange(m)

        if n_art:
            cost = np.concatenate([np.zeros(n), np.ones(n_art)])
            self._iterate(cost)
            infeasibility = float(np.sum(self.beta[self.basis >= n]))
            if infeasibility > self.config.feasibility_tol * max(1.0, np.max(np.abs(form.b), initial=0.0)):
                return LpStatus.INFEASIBLE, None, None, self.rows
            self._drive_out_artificials(n)
            self.tab = self.tab[:, :n]
            self.upper = self.upper[:n]
            self.at_upper = self.at_upper[:n]

        status = self._iterate(form.cost)
        if status == LpStatus.UNBOUNDED:
            return status, None, None, self.rows
        z, duals = self._recover(n)
        return LpStatus.OPTIMAL, z, duals, self.rows

    def _reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        return cost - cost[self.basis] @ self.tab

    def _iterate(self, cost: np.ndarray) -> LpStatus:
        config = self.config
        d = self._reduced_costs(cost)
        n_total = self.tab.shape[1]
        while True:
            if self.iterations >= self.iteration_cap:
                raise NumericalFailure(f"simplex exceeded {self.iteration_cap} iterations")
            nonbasic = np.ones(n_total, dtype=bool)
            nonbasic[self.basis] = False
            movable = nonbasic & (self.upper > 0.0)
            improving = movable & (
                (~self.at_upper & (d < -config.optimality_tol))
                | (self.at_upper & (d > config.optimality_tol))
            )
            candidates = np.flatnonzero(improving)
            if candidates.size == 0:
                return LpStatus.OPTIMAL

            bland = self.iterations >= self.bland_after
            if bland:
                entering = int(candidates[0])
            else:
                entering = int(candidates[np.argmax(np.abs(d[candidates]))])
            direction = -1.0 if self.at_upper[entering] else 1.0

            step = self._ratio_test(entering, direction, bland)
            self.iterations += 1
            if step is None:
                return LpStatus.UNBOUNDED
            theta, row = step
            column = self.tab[:, entering].copy()
            self.beta -= direction * theta * column
            if row is None:
                self.at_upper[entering] = not self.at_upper[entering]
                continue

            leaving = self.basis[row]
            self.at_upper[leaving] = direction * column[row] < 0.0
            start = self.upper[entering] if direction < 0 else 0.0
            self.beta[row] = start + direction * theta
            self._pivot(row, entering)
            d -= d[entering] * self.tab[row]
            d[entering] = 0.0

    def _ratio_test(self, entering: int, direction: float, bland: bool):
        """Step length and leaving row (None for a bound flip); None when unbounded"""
        pivot_tol = self.config.pivot_tol
        t = direction * self.tab[:, entering]
        basic_upper = self.upper[self.basis]
        ratios = np.full(t.size, np.inf)
        down = t > pivot_tol
        ratios[down] = np.maximum(self.beta[down], 0.0) / t[down]
        up = (t < -pivot_tol) & np.isfinite(basic_upper)
        ratios[up] = np.maximum(basic_upper[up] - self.beta[up], 0.0) / -t[up]

        theta_row = ratios.min(initial=np.inf)
        theta_flip = self.upper[entering]
        if not np.isfinite(theta_row) and not np.isfinite(theta_flip):
            return None
        if theta_flip <= theta_row:
            return theta_flip, None

        ties = np.flatnonzero(ratios <= theta_row + 1e-12)
        if bland:
            row = int(ties[np.argmin(self.basis[ties])])
        else:
            row = int(ties[np.argmax(np.abs(t[ties]))])
        return theta_row, row

    def _pivot(self, row: int, entering: int) -> None:
        tab = self.tab
        tab[row] /= tab[row, entering]
        column = tab[:, entering].copy()
        column[row] = 0.0
        tab -= np.outer(column, tab[row])
        self.basis[row] = entering
        self.at_upper[entering] = False

    def _drive_out_artificials(self, n_real: int) -> None:
        pivot_tol = self.config.pivot_tol
        row = 0
        while row < self.basis.size:
            if self.basis[row] < n_real:
                row += 1
                continue
            nonbasic = np.ones(n_real, dtype=bool)
            nonbasic[self.basis[self.basis < n_real]] = False
            entries = np.where(nonbasic, np.abs(self.tab[row, :n_real]), 0.0)
            entering = int(np.argmax(entries)) if entries.size else 0
            if entries.size and entries[entering] > pivot_tol:
                value = self.upper[entering] if self.at_upper[entering] else 0.0
                self._pivot(row, entering)
                self.beta[row] = value
                row += 1
            else:
                logger.debug(f"Dropping redundant row {self.rows[row]}")
                keep = np.arange(self.basis.size) != row
                self.tab = self.tab[keep]
                self.beta = self.beta[keep]
                self.basis = self.basis[keep]
                self.rows = self.rows[keep]

    def _recover(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """Recompute basic values and row duals from the basis matrix"""
        form = self.form
        z = np.where(self.at_upper, self.upper, 0.0)
        z[self.basis] = 0.0
        duals = np.zeros(form.n_rows)
        if self.basis.size == 0:
            return z, duals
        A_rows = form.A[self.rows]
        B = A_rows[:, self.basis]
        rhs = form.b[self.rows] - A_rows @ z
        try:
            z[self.basis] = np.linalg.solve(B, rhs)
            duals[self.rows] = np.linalg.solve(B.T, form.cost[self.basis])
        except np.linalg.LinAlgError:
            logger.warning("Basis matrix singular on recovery; using tableau values")
            z[self.basis] = self.beta
        return z, duals


def _solve_simplex(lp: LinearProgram, config: LpConfig) -> LpSolution:
    form = _StandardForm(lp)
    simplex = _BoundedSimplex(form, config)
    status, z, row_duals, _ = simplex.solve()
    logger.debug(
        f"Simplex {status.value} after {simplex.iterations} iterations "
        f"({form.n_rows} rows, {form.n_cols} columns)"
    )
    if status != LpStatus.OPTIMAL:
        return LpSolution(x=np.full(lp.n, np.nan), objective_value=np.nan, status=status,
                          iterations=simplex.iterations)

    x = np.clip(form.to_original(z), lp.lower, lp.upper)
    multipliers = -row_duals * form.sign / form.scale
    return LpSolution(
        x=x,
        objective_value=float(lp.objective @ x),
        status=status,
        ineq_duals=multipliers[:lp.m],
        eq_duals=multipliers[lp.m:],
        iterations=simplex.iterations,
    )


def _solve_highs(lp: LinearProgram) -> LpSolution:
    bounds = [
        (None if np.isinf(lo) else lo, None if np.isinf(hi) else hi)
        for lo, hi in zip(lp.lower, lp.upper)
    ]
    result = linprog(
        lp.objective,
        A_ub=lp.ineq_matrix if lp.m else None,
        b_ub=lp.ineq_rhs if lp.m else None,
        A_eq=lp.eq_matrix if lp.p else None,
        b_eq=lp.eq_rhs if lp.p else None,
        bounds=bounds,
        method="highs",
    )
    iterations = int(getattr(result, "nit", 0) or 0)
    if result.status == 2:
        return LpSolution(np.full(lp.n, np.nan), np.nan, LpStatus.INFEASIBLE, iterations=iterations)
    if result.status == 3:
        return LpSolution(np.full(lp.n, np.nan), np.nan, LpStatus.UNBOUNDED, iterations=iterations)
    if result.status != 0:
        raise NumericalFailure(f"HiGHS failed: {result.message}")
    ineq_duals = -np.asarray(result.ineqlin.marginals) if lp.m else np.zeros(0)
    eq_duals = -np.asarray(result.eqlin.marginals) if lp.p else np.zeros(0)
    return LpSolution(
        x=np.asarray(result.x),
        objective_value=float(result.fun),
        status=LpStatus.OPTIMAL,
        ineq_duals=ineq_duals,
        eq_duals=eq_duals,
        iterations=iterations,
    )


def solve_lp(lp: LinearProgram, method: str = "simplex", config: Optional[LpConfig] = None) -> LpSolution:
    """
    Solve a linear program.

    Args:
        lp: problem data
        method: "simplex" (built-in tableau simplex) or "highs" (scipy)
        config: simplex tolerances and iteration limits

    Returns:
        LpSolution; x and objective_value are NaN unless status is Optimal

    Raises:
        NumericalFailure: if the simplex exceeds its iteration cap
    """
    if method == "simplex":
        return _solve_simplex(lp, config or LpConfig())
    if method == "highs":
        return _solve_highs(lp)
    raise ValueError(f"unknown LP method '{method}'")
