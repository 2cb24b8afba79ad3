"""
Stiffness weight fitting against measured cup wrenches.

Four parameters are fitted with w_normal,xy fixed at 1:
    [w_normal,z, w_compressed,xy, w_compressed,z, f_z threshold]
Each candidate is scored by running the one-shot compression adjustment on
every sample and summing per-cup wrench errors. Seeded multi-start
Nelder-Mead; the fitted parameter set is always the first start.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from ..config.settings import CalibrationConfig
from ..exceptions import ConfigError, DegenerateFit, DimensionMismatch, InsufficientData, SingularSystem
from .grasp_constraints import distribution_map
from .gripper import DistributionMatrices, GripperModel, StiffnessWeights, assemble_distribution_matrices
from .load_distribution import normal_weights, weights_for_flags
from .se3 import Wrench

logger = logging.getLogger(__name__)

WRENCH_COMPONENTS = ("mx", "my", "mz", "fx", "fy", "fz")
FITTED_WEIGHTS = StiffnessWeights(
    normal=(1.0, 1.0, 2.3682),
    compressed=(0.8369, 0.8369, 0.1321),
    compression_threshold=-47.19,
)
MIN_EXCITATION_RANK = 4


@dataclass(frozen=True, eq=False)
class WrenchSample:
    """Synchronized base-sensor wrench and per-cup sensor wrenches (cup frames)"""
    tool_wrench: Wrench
    cup_wrenches: List[Wrench]


@dataclass(eq=False)
class FitResult:
    weights: StiffnessWeights
    parameters: np.ndarray
    objective: float
    baseline_objective: float
    per_sample_residuals: np.ndarray
    degenerate: bool = False
    message: str = ""
    starts: List[Dict[str, float]] = field(default_factory=list)


def tool_columns() -> List[str]:
    return [f"tool_{c}" for c in WRENCH_COMPONENTS]


def cup_columns(n_cups: int) -> List[str]:
    return [f"cup{i}_{c}" for i in range(1, n_cups + 1) for c in WRENCH_COMPONENTS]


def samples_to_frame(samples: Sequence[WrenchSample]) -> pd.DataFrame:
    n_cups = len(samples[0].cup_wrenches) if samples else 0
    rows = [
        np.concatenate([s.tool_wrench.as_vector()] + [w.as_vector() for w in s.cup_wrenches])
        for s in samples
    ]
    return pd.DataFrame(rows, columns=tool_columns() + cup_columns(n_cups))


def samples_from_frame(df: pd.DataFrame, source: str = "") -> List[WrenchSample]:
    """
    Raises:
        ConfigError: if the header is not tool columns followed by whole cup blocks
    """
    columns = [str(c).strip() for c in df.columns]
    n_cup_columns = len(columns) - len(WRENCH_COMPONENTS)
    if n_cup_columns <= 0 or n_cup_columns % len(WRENCH_COMPONENTS) != 0:
        raise ConfigError(f"expected 6 tool columns and 6 per cup, got {len(columns)} columns", path=source)
    n_cups = n_cup_columns // len(WRENCH_COMPONENTS)
    expected = tool_columns() + cup_columns(n_cups)
    for index, (found, wanted) in enumerate(zip(columns, expected)):
        if found != wanted:
            raise ConfigError(f"column {index + 1} is '{found}', expected '{wanted}'", path=source, key=found)

    try:
        values = df.to_numpy(dtype=float)
    except ValueError as e:
        raise ConfigError(f"non-numeric value in dataset: {e}", path=source)
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        row, col = bad[0]
        raise ConfigError("missing or non-finite value", path=source, key=expected[col], line=int(row) + 2)

    return [
        WrenchSample(
            tool_wrench=Wrench.from_vector(row[:6]),
            cup_wrenches=[Wrench.from_vector(row[6 + 6 * i:12 + 6 * i]) for i in range(n_cups)],
        )
        for row in values
    ]


def load_samples(file_path: Union[str, Path]) -> List[WrenchSample]:
    """Read a wrench dataset CSV"""
    path = Path(file_path)
    try:
        df = pd.read_csv(path, encoding="utf-8-sig")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigError(f"cannot read dataset: {e}", path=str(path))
    samples = samples_from_frame(df, str(path))
    logger.info(f"Loaded {len(samples)} samples with {len(samples[0].cup_wrenches) if samples else 0} cups from {path}")
    return samples


def weights_from_parameters(parameters: Sequence[float], template: StiffnessWeights) -> StiffnessWeights:
    w_normal_z, w_comp_xy, w_comp_z, threshold = (float(p) for p in parameters)
    return StiffnessWeights(
        normal=(1.0, 1.0, w_normal_z),
        compressed=(w_comp_xy, w_comp_xy, w_comp_z),
        compression_threshold=threshold,
        threshold_direction=template.threshold_direction,
    )


def parameters_from_weights(weights: StiffnessWeights) -> np.ndarray:
    return np.array([
        weights.normal[2],
        weights.compressed[0],
        weights.compressed[2],
        weights.compression_threshold,
    ])


def predict_cup_wrenches(tool_wrenches: np.ndarray, g: GripperModel,
                         matrices: Optional[DistributionMatrices] = None) -> np.ndarray:
    """
    Adjusted distribution for a batch of tool wrenches.

    Returns:
        S x N_s x 6 cup wrenches
    """
    matrices = matrices or assemble_distribution_matrices(g)
    tool_wrenches = np.atleast_2d(tool_wrenches)
    base = distribution_map(g, normal_weights(g), matrices).matrix
    cups = (tool_wrenches @ base.T).reshape(len(tool_wrenches), g.n_cups, 6)
    flags = np.array([[g.weights.is_compressed(fz) for fz in sample[:, 5]] for sample in cups])

    for pattern in {tuple(f) for f in flags if f.any()}:
        rows = np.flatnonzero((flags == np.array(pattern)).all(axis=1))
        adjusted = distribution_map(g, weights_for_flags(g, pattern), matrices).matrix
        cups[rows] = (tool_wrenches[rows] @ adjusted.T).reshape(len(rows), g.n_cups, 6)
    return cups


class _Objective:
    def __init__(self, samples: Sequence[WrenchSample], g: GripperModel, full_wrench: bool):
        self.g = g
        self.matrices = assemble_distribution_matrices(g)
        self.tool = np.array([s.tool_wrench.as_vector() for s in samples])
        self.measured = np.array([[w.as_vector() for w in s.cup_wrenches] for s in samples])
        self.components = slice(0, 6) if full_wrench else slice(3, 6)

    def residuals(self, parameters: np.ndarray) -> np.ndarray:
        candidate = self.g.with_weights(weights_from_parameters(parameters, self.g.weights))
        predicted = predict_cup_wrenches(self.tool, candidate, self.matrices)
        errors = predicted[:, :, self.components] - self.measured[:, :, self.components]
        return np.linalg.norm(errors, axis=2).sum(axis=1)

    def __call__(self, parameters: np.ndarray) -> float:
        try:
            return float(self.residuals(parameters).sum())
        except (SingularSystem, ConfigError):
            return np.inf


def _start_points(baseline: np.ndarray, config: CalibrationConfig) -> List[np.ndarray]:
    rng = np.random.default_rng(config.seed)
    w_lo, w_hi = config.weight_bounds
    t_lo, t_hi = config.threshold_bounds
    starts = [baseline]
    for _ in range(config.n_starts - 1):
        weights = np.exp(rng.uniform(np.log(w_lo), np.log(w_hi), size=3))
        starts.append(np.append(weights, rng.uniform(t_lo, t_hi)))
    return starts


def _is_flat(objective: _Objective, point: np.ndarray, value: float, relative_step: float) -> bool:
    for i in range(point.size):
        step = relative_step * max(abs(point[i]), 1.0)
        for sign in (1.0, -1.0):
            trial = point.copy()
            trial[i] += sign * step
            if abs(objective(trial) - value) > 1e-9 * (1.0 + abs(value)):
                return False
    return True


def fit_weights(samples: Sequence[WrenchSample], g: GripperModel,
                config: Optional[CalibrationConfig] = None,
                baseline: Optional[StiffnessWeights] = None,
                strict: bool = False) -> FitResult:
    """
    Fit the four stiffness parameters to measured cup wrenches.

    Args:
        samples: synchronized wrench snapshots
        g: gripper; its threshold direction is kept
        config: starts, seed, bounds and objective selection
        baseline: first start, defaults to FITTED_WEIGHTS
        strict: raise DegenerateFit instead of flagging it

    Returns:
        FitResult whose objective never exceeds the baseline objective

    Raises:
        InsufficientData: fewer than config.min_samples samples
        DimensionMismatch: sample cup count differs from the gripper
        DegenerateFit: only with strict=True
    """
    config = config or CalibrationConfig()
    if len(samples) < config.min_samples:
        raise InsufficientData(f"need at least {config.min_samples} samples, got {len(samples)}")
    mismatched = [i for i, s in enumerate(samples) if len(s.cup_wrenches) != g.n_cups]
    if mismatched:
        raise DimensionMismatch(
            f"sample {mismatched[0]} has {len(samples[mismatched[0]].cup_wrenches)} cups, gripper has {g.n_cups}"
        )

    objective = _Objective(samples, g, config.full_wrench)
    bounds = [config.weight_bounds] * 3 + [config.threshold_bounds]
    lower = np.array([b[0] for b in bounds])
    upper = np.array([b[1] for b in bounds])
    baseline_point = np.clip(parameters_from_weights(baseline or FITTED_WEIGHTS), lower, upper)
    baseline_value = objective(baseline_point)

    best_point, best_value = baseline_point, baseline_value
    starts = []
    for index, start in enumerate(_start_points(baseline_point, config)):
        result = minimize(
            objective,
            start,
            method="Nelder-Mead",
            bounds=bounds,
            options={"maxfev": config.max_function_evals, "xatol": 1e-8, "fatol": 1e-10},
        )
        value = float(result.fun)
        starts.append({"start": index, "objective": value, "evaluations": int(result.nfev)})
        logger.debug(f"Start {index}: objective {value:.6g} after {result.nfev} evaluations")
        if value < best_value:
            best_point, best_value = np.asarray(result.x, dtype=float), value
    logger.info(f"Best objective {best_value:.6g} (baseline {baseline_value:.6g})")

    excitation = np.linalg.matrix_rank(objective.tool)
    message = ""
    if excitation < MIN_EXCITATION_RANK:
        message = f"tool wrenches excite rank {excitation} of {MIN_EXCITATION_RANK} needed"
    elif _is_flat(objective, best_point, best_value, config.flatness_perturbation):
        message = "objective is flat around the fit"
    degenerate = bool(message)
    if degenerate:
        logger.warning(f"Degenerate fit: {message}")
        if strict:
            raise DegenerateFit(message)

    return FitResult(
        weights=weights_from_parameters(best_point, g.weights),
        parameters=best_point,
        objective=best_value,
        baseline_objective=baseline_value,
        per_sample_residuals=objective.residuals(best_point),
        degenerate=degenerate,
        message=message,
        starts=starts,
    )


def synthesize_samples(tool_wrenches: np.ndarray, g: GripperModel,
                       noise_std: float = 0.0, seed: int = 0) -> List[WrenchSample]:
    """Samples generated by the gripper's own model, optionally with Gaussian force noise"""
    rng = np.random.default_rng(seed)
    cups = predict_cup_wrenches(np.asarray(tool_wrenches, dtype=float), g)
    if noise_std > 0.0:
        cups[:, :, 3:] += rng.normal(0.0, noise_std, size=cups[:, :, 3:].shape) * np.abs(cups[:, :, 3:])
    return [
        WrenchSample(Wrench.from_vector(tool), [Wrench.from_vector(w) for w in sample])
        for tool, sample in zip(np.atleast_2d(tool_wrenches), cups)
    ]
