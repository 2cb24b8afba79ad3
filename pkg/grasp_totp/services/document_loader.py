"""
Document loading: YAML files -> validated schemas -> domain objects.

Every parse or validation problem is raised as ConfigError naming the file,
the offending key and, where the YAML node can be located, its line.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Type, TypeVar, Union

import numpy as np
import pandas as pd
import yaml
from pydantic import BaseModel, ValidationError

from ..config.settings import PRESETS_DIR
from ..core.dynamics import KinematicChain, ObjectModel, PathSpec, RevoluteJoint
from ..core.gripper import CapacityModel, GripperModel, StiffnessWeights, SuctionCup
from ..core.se3 import RigidTransform, rotation_from_z_axis
from ..core.totp import KinematicLimits
from ..exceptions import ConfigError, GraspPlanningError
from ..schemas import (
    ChainDocument,
    GripperDocument,
    LimitsDocument,
    ObjectDocument,
    PathDocument,
    ScenarioDocument,
    TransformDocument,
    WeightsDocument,
)

logger = logging.getLogger(__name__)

PRESET_PREFIX = "preset:"
PRESET_CATEGORIES = ("grippers", "weights", "scenarios")
TRAJECTORY_COLUMNS = ["k", "s", "x", "sdot", "sddot", "t"]

Model = TypeVar("Model", bound=BaseModel)
DocumentRef = Union[str, Path, Dict[str, Any]]


@dataclass(eq=False)
class Scenario:
    """Everything a planning or max-load run needs"""
    chain: KinematicChain
    path: PathSpec
    limits: KinematicLimits
    gripper: Optional[GripperModel] = None
    object: Optional[ObjectModel] = None
    solver_overrides: Dict[str, Any] = field(default_factory=dict)
    source: str = ""


def _key_line(node: Optional[yaml.Node], location: Sequence[Any]) -> Optional[int]:
    """1-based line of the YAML node at a pydantic error location"""
    line = None
    for part in location:
        if isinstance(node, yaml.MappingNode):
            pair = next(((key, value) for key, value in node.value if key.value == str(part)), None)
            if pair is None:
                break
            line = pair[0].start_mark.line + 1
            node = pair[1]
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            node = node.value[part]
            line = node.start_mark.line + 1
        else:
            break
    return line


def preset_path(category: str, name: str) -> Path:
    path = PRESETS_DIR / category / f"{name}.yaml"
    if not path.exists():
        available = ", ".join(list_presets().get(category, []))
        raise ConfigError(f"unknown {category[:-1]} preset '{name}' (available: {available})")
    return path


def list_presets() -> Dict[str, List[str]]:
    """Shipped preset names per category"""
    return {
        category: sorted(p.stem for p in (PRESETS_DIR / category).glob("*.yaml"))
        for category in PRESET_CATEGORIES
    }


class DocumentLoader:
    """Loads documents relative to a base directory"""

    def __init__(self, base_dir: Union[str, Path] = "."):
        self.base_dir = Path(base_dir)

    def _resolve(self, ref: Union[str, Path], category: str) -> Path:
        text = str(ref)
        if text.startswith(PRESET_PREFIX):
            return preset_path(category, text[len(PRESET_PREFIX):])
        path = Path(text)
        return path if path.is_absolute() else self.base_dir / path

    @staticmethod
    def read_yaml(path: Path) -> Tuple[Any, Optional[yaml.Node]]:
        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read file: {e}", path=str(path))
        try:
            return yaml.safe_load(text), yaml.compose(text, Loader=yaml.SafeLoader)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ConfigError(f"invalid YAML: {getattr(e, 'problem', e)}", path=str(path),
                              line=mark.line + 1 if mark else None)

    @staticmethod
    def validate(model: Type[Model], data: Any, source: str = "",
                 node: Optional[yaml.Node] = None) -> Model:
        if not isinstance(data, dict):
            raise ConfigError(f"expected a mapping for {model.__name__}", path=source or None)
        try:
            return model.model_validate(data)
        except ValidationError as e:
            error = e.errors()[0]
            location = [part for part in error["loc"] if not isinstance(part, str) or part in _all_keys(data)]
            key = ".".join(str(part) for part in error["loc"])
            raise ConfigError(error["msg"], path=source or None, key=key, line=_key_line(node, location))

    def _document(self, ref: DocumentRef, model: Type[Model], category: str) -> Tuple[Model, str]:
        if isinstance(ref, dict):
            return self.validate(model, ref, source=f"inline {model.__name__}"), "inline"
        path = self._resolve(ref, category)
        data, node = self.read_yaml(path)
        return self.validate(model, data, str(path), node), str(path)

    def load_weights(self, ref: Union[DocumentRef, WeightsDocument]) -> StiffnessWeights:
        doc = ref if isinstance(ref, WeightsDocument) else self._document(ref, WeightsDocument, "weights")[0]
        return StiffnessWeights(
            normal=tuple(doc.normal),
            compressed=tuple(doc.compressed),
            compression_threshold=doc.fz_threshold_N,
            threshold_direction=doc.threshold_direction.value,
        )

    def load_gripper(self, ref: DocumentRef) -> GripperModel:
        doc, source = self._document(ref, GripperDocument, "grippers")
        weights = StiffnessWeights() if doc.weights is None else self.load_weights(doc.weights)
        try:
            cups = tuple(
                SuctionCup(
                    pose_in_tool=RigidTransform(rotation_from_z_axis(cup.z_axis), cup.position_m),
                    pad_radius=cup.pad_radius_m,
                    suction_force=cup.suction_force_N,
                    pull_off_force=cup.pull_off_force_N,
                )
                for cup in doc.cups
            )
            gripper = GripperModel(
                cups=cups,
                friction=doc.friction_mu,
                weights=weights,
                capacity_model=CapacityModel(doc.capacity_model.value),
            )
        except GraspPlanningError as e:
            raise ConfigError(str(e), path=source, key="cups")
        if doc.drop_cups:
            bad = [i for i in doc.drop_cups if not 0 <= i < gripper.n_cups]
            if bad:
                raise ConfigError(f"drop_cups indices {bad} out of range", path=source, key="drop_cups")
            gripper = gripper.without_cups(doc.drop_cups)
        logger.info(f"Loaded gripper with {gripper.n_cups} cups from {source}")
        return gripper

    def load_object(self, ref: DocumentRef) -> ObjectModel:
        doc, source = self._document(ref, ObjectDocument, "objects")
        try:
            if doc.dims_m is not None:
                return ObjectModel.from_box(doc.mass_kg, doc.dims_m, doc.com_offset_m)
            return ObjectModel(doc.mass_kg, np.array(doc.inertia), doc.com_offset_m)
        except GraspPlanningError as e:
            raise ConfigError(str(e), path=source, key="inertia")

    @staticmethod
    def _transform(doc: TransformDocument) -> RigidTransform:
        return RigidTransform.from_rotvec(doc.rotvec_rad, doc.translation_m)

    def load_chain(self, ref: DocumentRef) -> KinematicChain:
        doc, source = self._document(ref, ChainDocument, "chains")
        try:
            joints = tuple(
                RevoluteJoint(joint.axis, joint.origin_m, self._transform(joint.parent_offset))
                for joint in doc.joints
            )
            return KinematicChain(joints, self._transform(doc.tool_offset))
        except GraspPlanningError as e:
            raise ConfigError(str(e), path=source, key="joints")

    def load_path(self, ref: DocumentRef) -> PathSpec:
        doc, source = self._document(ref, PathDocument, "paths")
        try:
            return PathSpec(
                knots=np.array(doc.knots_rad),
                grid=None if doc.s_grid is None else np.array(doc.s_grid),
                start_derivative=doc.start_derivative,
                end_derivative=doc.end_derivative,
            )
        except GraspPlanningError as e:
            raise ConfigError(str(e), path=source, key="knots_rad")

    def load_limits(self, ref: DocumentRef) -> KinematicLimits:
        doc, source = self._document(ref, LimitsDocument, "limits")
        try:
            return KinematicLimits(
                vel_max=doc.vel_max_rad_s,
                acc_max=doc.acc_max_rad_s2,
                jerk_max=doc.jerk_max_rad_s3,
            )
        except ConfigError as e:
            raise ConfigError(str(e), path=source, key=e.key)

    def load_scenario(self, ref: Union[str, Path]) -> Scenario:
        """
        Load a scenario file; referenced files resolve relative to the scenario.

        Raises:
            ConfigError: on any parse or validation failure
        """
        path = self._resolve(ref, "scenarios")
        data, node = self.read_yaml(path)
        doc = self.validate(ScenarioDocument, data, str(path), node)
        loader = DocumentLoader(path.parent)
        scenario = Scenario(
            chain=loader.load_chain(doc.chain),
            path=loader.load_path(doc.path),
            limits=loader.load_limits(doc.limits),
            gripper=None if doc.gripper is None else loader.load_gripper(doc.gripper),
            object=None if doc.object is None else loader.load_object(doc.object),
            solver_overrides=doc.solver.overrides(),
            source=str(path),
        )
        if scenario.path.n_joints != scenario.chain.n_joints:
            raise ConfigError(
                f"path has {scenario.path.n_joints} joints, chain has {scenario.chain.n_joints}",
                path=str(path), key="path",
            )
        for name in ("vel_max", "acc_max", "jerk_max"):
            limit = getattr(scenario.limits, name)
            if limit is not None and limit.size != scenario.chain.n_joints:
                raise ConfigError(f"{name} has {limit.size} entries for {scenario.chain.n_joints} joints",
                                  path=str(path), key="limits")
        logger.info(f"Loaded scenario {path}")
        return scenario

    @staticmethod
    def load_trajectory(path: Union[str, Path], n_knots: Optional[int] = None) -> np.ndarray:
        """
        Read x from a trajectory CSV written by the planner.

        Raises:
            ConfigError: on a missing column, non-numeric values or a knot count mismatch
        """
        path = Path(path)
        try:
            df = pd.read_csv(path)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise ConfigError(f"cannot read trajectory: {e}", path=str(path))
        columns = [str(c).strip() for c in df.columns]
        if columns[:len(TRAJECTORY_COLUMNS)] != TRAJECTORY_COLUMNS:
            raise ConfigError(f"trajectory must start with columns {TRAJECTORY_COLUMNS}", path=str(path))
        x = pd.to_numeric(df["x"], errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(x) | (x < 0.0))
        if bad.size:
            raise ConfigError("x must be finite and non-negative", path=str(path), key="x", line=int(bad[0]) + 2)
        if n_knots is not None and x.size != n_knots + 1:
            raise ConfigError(f"trajectory has {x.size} rows, scenario expects {n_knots + 1}", path=str(path))
        return x


def _all_keys(data: Any) -> set:
    keys = set()
    if isinstance(data, dict):
        for key, value in data.items():
            keys.add(str(key))
            keys |= _all_keys(value)
    elif isinstance(data, list):
        for value in data:
            keys |= _all_keys(value)
    return keys
