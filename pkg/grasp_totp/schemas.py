"""
Pydantic models for every structured input document.

Key names are part of the file formats and must not change.
"""
from enum import Enum
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Vector3 = List[float]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _check_length(values: Optional[List[float]], n: int, name: str) -> Optional[List[float]]:
    if values is not None and len(values) != n:
        raise ValueError(f"{name} needs {n} values, got {len(values)}")
    return values


class ThresholdDirectionName(str, Enum):
    GREATER_THAN = "greater-than"
    LESS_THAN = "less-than"


class CapacityModelName(str, Enum):
    SUCTION = "suction"
    PULL_OFF = "pull-off"


class WeightsDocument(StrictModel):
    """Stiffness weights for the normal and compressed cup phases"""
    normal: Vector3 = Field(..., description="Diagonal weights [wx, wy, wz] of a normal cup")
    compressed: Vector3 = Field(..., description="Diagonal weights [wx, wy, wz] of a compressed cup")
    fz_threshold_N: float = Field(..., description="Cup-frame normal force that flags compression")
    threshold_direction: ThresholdDirectionName = Field(
        ThresholdDirectionName.GREATER_THAN, description="Flag when f_z is greater or less than the threshold"
    )

    @field_validator("normal", "compressed")
    @classmethod
    def _three_positive(cls, values: List[float]) -> List[float]:
        _check_length(values, 3, "weights")
        if min(values) <= 0.0:
            raise ValueError("weights must be positive")
        return values


class CupDocument(StrictModel):
    position_m: Vector3 = Field(..., description="Cup center in the tool frame")
    z_axis: Vector3 = Field(default_factory=lambda: [0.0, 0.0, 1.0], description="Cup normal in the tool frame")
    pad_radius_m: float = Field(..., gt=0.0, description="Pad radius")
    suction_force_N: float = Field(..., ge=0.0, description="Suction force psi")
    pull_off_force_N: Optional[float] = Field(None, ge=0.0, description="Measured pull-off force")

    @field_validator("position_m", "z_axis")
    @classmethod
    def _three(cls, values: List[float]) -> List[float]:
        return _check_length(values, 3, "vector")


class GripperDocument(StrictModel):
    cups: List[CupDocument] = Field(..., min_length=1, description="Suction cups")
    friction_mu: float = Field(..., gt=0.0, description="Friction coefficient between pads and object")
    weights: Optional[Union[WeightsDocument, str]] = Field(
        None, description="Inline weights or 'preset:<name>'"
    )
    capacity_model: CapacityModelName = Field(CapacityModelName.SUCTION, description="Per-cup capacity source")
    drop_cups: List[int] = Field(default_factory=list, description="0-based cups removed from the layout")


class ObjectDocument(StrictModel):
    mass_kg: float = Field(..., gt=0.0, description="Object mass")
    dims_m: Optional[Vector3] = Field(None, description="Box side lengths [a, b, c] for a uniform-density box")
    inertia: Optional[List[Vector3]] = Field(None, description="3x3 inertia about the CoM in tool axes")
    com_offset_m: Vector3 = Field(default_factory=lambda: [0.0, 0.0, 0.0], description="CoM in the tool frame")

    @model_validator(mode="after")
    def _one_inertia_source(self) -> "ObjectDocument":
        if (self.dims_m is None) == (self.inertia is None):
            raise ValueError("give exactly one of dims_m or inertia")
        if self.inertia is not None and (len(self.inertia) != 3 or any(len(r) != 3 for r in self.inertia)):
            raise ValueError("inertia must be 3x3")
        _check_length(self.dims_m, 3, "dims_m")
        _check_length(self.com_offset_m, 3, "com_offset_m")
        return self


class TransformDocument(StrictModel):
    translation_m: Vector3 = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    rotvec_rad: Vector3 = Field(default_factory=lambda: [0.0, 0.0, 0.0], description="Rotation vector")


class JointDocument(StrictModel):
    axis: Vector3 = Field(..., description="Rotation axis in the joint frame")
    origin_m: Vector3 = Field(default_factory=lambda: [0.0, 0.0, 0.0], description="Point on the axis")
    parent_offset: TransformDocument = Field(default_factory=TransformDocument)


class ChainDocument(StrictModel):
    joints: List[JointDocument] = Field(..., min_length=1)
    tool_offset: TransformDocument = Field(default_factory=TransformDocument)


class PathDocument(StrictModel):
    knots_rad: List[List[float]] = Field(..., min_length=2, description="Joint configurations, one row per knot")
    s_grid: Optional[List[float]] = Field(None, description="Explicit path parameter per knot; uniform if absent")
    start_derivative: Optional[List[float]] = None
    end_derivative: Optional[List[float]] = None

    @model_validator(mode="after")
    def _rectangular(self) -> "PathDocument":
        widths = {len(row) for row in self.knots_rad}
        if len(widths) != 1:
            raise ValueError("every knot row needs the same number of joints")
        if self.s_grid is not None and len(self.s_grid) != len(self.knots_rad):
            raise ValueError("s_grid needs one value per knot")
        return self


class LimitsDocument(StrictModel):
    vel_max_rad_s: Optional[List[float]] = None
    acc_max_rad_s2: Optional[List[float]] = None
    jerk_max_rad_s3: Optional[List[float]] = None


class SolverDocument(StrictModel):
    n_knots: Optional[int] = Field(None, ge=2)
    epsilon: Optional[float] = Field(None, gt=0.0)
    max_iters: Optional[int] = Field(None, ge=1)
    trust_radius: Optional[float] = Field(None, gt=0.0)
    grasp_enabled: Optional[bool] = None
    weight_adjustment_enabled: Optional[bool] = None
    lp_method: Optional[str] = Field(None, pattern="^(simplex|highs)$")

    def overrides(self) -> Dict[str, object]:
        """Problem keyword overrides for the options that are set"""
        names = {"grasp_enabled": "grasp_constraints_enabled"}
        return {names.get(k, k): v for k, v in self.model_dump(exclude_none=True).items()}


DocumentRef = Union[str, Dict[str, object]]


class ScenarioDocument(StrictModel):
    """Scenario bundle; each entry is a relative file path, 'preset:<name>' or an inline document"""
    gripper: Optional[DocumentRef] = None
    object: Optional[DocumentRef] = None
    chain: DocumentRef
    path: DocumentRef
    limits: DocumentRef
    solver: SolverDocument = Field(default_factory=SolverDocument)
