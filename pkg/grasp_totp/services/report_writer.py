"""
CSV / JSON reports for plotting and diff-based checks.

Column order is fixed and numbers carry a fixed number of significant digits.
"""
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from ..core.calibration import FitResult
from ..core.grasp_constraints import implied_path_acceleration
from ..core.gripper import RING_POINT_COUNT
from ..core.load_distribution import DistributionComparison, LoadDistribution
from ..core.totp import MaxLoadResult, TotpProblem, TotpSolution
from ..utils.file_handler import FileHandler

logger = logging.getLogger(__name__)


def format_number(value: float, significant_digits: int = 12) -> Optional[float]:
    """Round to significant digits; non-finite values become None (JSON null)"""
    value = float(value)
    if not math.isfinite(value):
        return None
    return float(f"{value:.{significant_digits}g}")


class ReportWriter:
    """Builds report tables and writes them under an output directory"""

    def __init__(self, output_dir: Union[str, Path] = "output", significant_digits: int = 12):
        self.output_dir = Path(output_dir)
        self.significant_digits = significant_digits

    def _number(self, value: float) -> Optional[float]:
        return format_number(value, self.significant_digits)

    def _target(self, filename: Union[str, Path]) -> Path:
        path = Path(filename)
        return path if path.is_absolute() or path.parent != Path(".") else self.output_dir / path

    # Planning

    @staticmethod
    def trajectory_dataframe(problem: TotpProblem, solution: TotpSolution) -> pd.DataFrame:
        """k, s, x, sdot, sddot, t, then q_j, qd_j, qdd_j per joint, then min_margin, active_row_label"""
        grid = problem.grid
        x = solution.x
        sdot = solution.sdot
        sddot = np.array([implied_path_acceleration(x, grid, k) for k in range(grid.size)])
        data: Dict[str, Any] = {
            "k": np.arange(grid.size),
            "s": grid,
            "x": x,
            "sdot": sdot,
            "sddot": sddot,
            "t": solution.timestamps,
        }
        q = np.array([problem.path.q(s) for s in grid])
        dq = np.array([problem.path.dq(s) for s in grid])
        ddq = np.array([problem.path.ddq(s) for s in grid])
        for j in range(problem.chain.n_joints):
            data[f"q_{j + 1}"] = q[:, j]
            data[f"qd_{j + 1}"] = dq[:, j] * sdot
            data[f"qdd_{j + 1}"] = ddq[:, j] * x + dq[:, j] * sddot
        data["min_margin"] = solution.knot_margins
        data["active_row_label"] = solution.knot_labels
        return pd.DataFrame(data)

    def plan_summary(self, solution: Optional[TotpSolution], statically_infeasible: bool = False) -> Dict[str, Any]:
        if solution is None:
            return {
                "total_time_s": None,
                "iterations": 0,
                "converged": False,
                "min_margin": None,
                "statically_infeasible": statically_infeasible,
            }
        return {
            "total_time_s": self._number(solution.total_time),
            "iterations": int(solution.iterations),
            "converged": bool(solution.converged),
            "min_margin": self._number(solution.min_margin),
            "statically_infeasible": statically_infeasible,
        }

    def write_trajectory(self, problem: TotpProblem, solution: TotpSolution,
                         filename: Union[str, Path] = "trajectory.csv") -> Path:
        path = FileHandler.save_csv(self._target(filename), self.trajectory_dataframe(problem, solution),
                                    self.significant_digits)
        logger.info(f"Trajectory written to {path}")
        return path

    def write_json(self, data: Dict[str, Any], filename: Union[str, Path]) -> Path:
        return FileHandler.save_json(self._target(filename), data)

    # Load distribution

    @staticmethod
    def distribution_dataframe(distribution: LoadDistribution) -> pd.DataFrame:
        rows = []
        for i, wrench in enumerate(distribution.per_cup_wrench):
            m, f = wrench.moment, wrench.force
            rows.append({
                "cup": i,
                "mx": m[0], "my": m[1], "mz": m[2],
                "fx": f[0], "fy": f[1], "fz": f[2],
                "compressed": bool(distribution.compressed_flags[i]) if distribution.compressed_flags else False,
            })
        return pd.DataFrame(rows)

    @staticmethod
    def ring_force_dataframe(distribution: LoadDistribution) -> pd.DataFrame:
        forces = distribution.ring_forces.reshape(-1, 3)
        return pd.DataFrame({
            "cup": np.repeat(np.arange(len(forces) // RING_POINT_COUNT), RING_POINT_COUNT),
            "point": np.tile(np.arange(RING_POINT_COUNT), len(forces) // RING_POINT_COUNT),
            "fx": forces[:, 0],
            "fy": forces[:, 1],
            "fz": forces[:, 2],
        })

    def comparison_summary(self, comparison: DistributionComparison) -> Dict[str, Any]:
        return {
            "qp_l1": self._number(comparison.qp_l1),
            "lp_l1": self._number(comparison.lp_l1),
            "qp_energy": self._number(comparison.qp_energy),
            "lp_energy": self._number(comparison.lp_energy),
            "qp_support": comparison.qp_support,
            "lp_support": comparison.lp_support,
        }

    def write_distribution(self, distribution: LoadDistribution,
                           filename: Union[str, Path] = "distribution.csv") -> Path:
        return FileHandler.save_csv(self._target(filename), self.distribution_dataframe(distribution),
                                    self.significant_digits)

    # Max load and fitting

    def max_load_summary(self, result: MaxLoadResult) -> Dict[str, Any]:
        return {
            "max_load_kg": self._number(result.max_load_kg),
            "active_row_label": result.active_row_label,
        }

    def fit_summary(self, result: FitResult) -> Dict[str, Any]:
        w_normal_z, w_comp_xy, w_comp_z, threshold = (self._number(p) for p in result.parameters)
        return {
            "w_normal_z": w_normal_z,
            "w_compressed_xy": w_comp_xy,
            "w_compressed_z": w_comp_z,
            "fz_threshold_N": threshold,
            "threshold_direction": result.weights.threshold_direction.value,
            "objective": self._number(result.objective),
            "baseline_objective": self._number(result.baseline_objective),
            "degenerate": bool(result.degenerate),
        }

    def write_residuals(self, result: FitResult, filename: Union[str, Path] = "residuals.csv") -> Path:
        df = pd.DataFrame({
            "sample": np.arange(result.per_sample_residuals.size),
            "residual": result.per_sample_residuals,
        })
        return FileHandler.save_csv(self._target(filename), df, self.significant_digits)

    def format_table(self, df: pd.DataFrame) -> str:
        """Plain-text table for stdout"""
        return df.to_string(index=False, float_format=lambda v: f"{v:.{self.significant_digits}g}")
