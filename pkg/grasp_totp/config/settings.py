import logging
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from ..exceptions import ConfigError

logger = logging.getLogger(__name__)

PRESETS_DIR = Path(__file__).parent / "presets"


@dataclass
class LoadDistributionConfig:
    """Load distribution configuration"""
    singular_condition_limit: float = 1e12
    support_relative_threshold: float = 0.01


@dataclass
class LpConfig:
    """Simplex solver configuration"""
    feasibility_tol: float = 1e-8
    optimality_tol: float = 1e-9
    pivot_tol: float = 1e-10
    bland_after_factor: int = 10  # Bland's rule after factor * (m + n) iterations
    iteration_cap_factor: int = 50


@dataclass
class SolverConfig:
    """Sequential LP trajectory solver configuration"""
    n_knots: int = 100
    epsilon: float = 1e-6
    max_iters: int = 50
    trust_radius: float = 0.5
    x_floor: float = 1e-6
    x_cap: float = 1e6
    lp_method: str = "simplex"
    jacobian_step: Optional[float] = None  # None: derived from the grid cell width
    grasp_enabled: bool = True
    weight_adjustment_enabled: bool = True
    max_load_tolerance_kg: float = 1e-3


@dataclass
class CalibrationConfig:
    """Stiffness weight fitting configuration"""
    n_starts: int = 16
    seed: int = 0
    min_samples: int = 10
    weight_bounds: Tuple[float, float] = (1e-3, 1e3)
    threshold_bounds: Tuple[float, float] = (-500.0, 500.0)
    full_wrench: bool = False
    max_function_evals: int = 4000
    flatness_perturbation: float = 0.05


@dataclass
class OutputConfig:
    """Report configuration"""
    significant_digits: int = 12
    output_directory: str = "output"


@dataclass
class LoggingConfig:
    """Logging configuration"""
    log_level: str = "INFO"
    log_file: Optional[str] = None


@dataclass
class Settings:
    """Main settings class"""
    load_distribution: LoadDistributionConfig = field(default_factory=LoadDistributionConfig)
    lp: LpConfig = field(default_factory=LpConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    log: LoggingConfig = field(default_factory=LoggingConfig)
    gravity: float = 9.8

    @classmethod
    def from_file(cls, filepath: str) -> "Settings":
        """Load settings overrides from a YAML file; unknown keys are rejected"""
        path = Path(filepath)
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigError(f"cannot read settings file: {e}", path=str(path))
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ConfigError(f"invalid YAML: {e}", path=str(path),
                              line=mark.line + 1 if mark else None)
        if not isinstance(data, dict):
            raise ConfigError("settings document must be a mapping", path=str(path))

        settings = cls()
        _apply_overrides(settings, data, str(path), prefix="")
        return settings

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def save_config(self, filepath: Optional[str] = None) -> Path:
        """Save current configuration to a YAML file"""
        path = Path(filepath) if filepath else Path(self.output.output_directory) / "current_settings.yaml"
        path.parent.mkdir(parents=True, exist_ok=True)
        data = self.to_dict()
        data["calibration"]["weight_bounds"] = list(data["calibration"]["weight_bounds"])
        data["calibration"]["threshold_bounds"] = list(data["calibration"]["threshold_bounds"])
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump(data, f, sort_keys=False)
        logger.info(f"Configuration saved to {path}")
        return path


def _apply_overrides(target: Any, data: Dict[str, Any], path: str, prefix: str) -> None:
    known = {f.name: f for f in fields(target)}
    for key, value in data.items():
        dotted = f"{prefix}{key}"
        if key not in known:
            raise ConfigError("unknown settings key", path=path, key=dotted)
        current = getattr(target, key)
        if is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError("expected a mapping", path=path, key=dotted)
            _apply_overrides(current, value, path, prefix=f"{dotted}.")
        elif isinstance(current, tuple):
            setattr(target, key, tuple(value))
        else:
            setattr(target, key, value)


# Global settings instance
_settings = None


def get_settings() -> Settings:
    """Get or create global settings instance"""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def set_settings(settings: Settings) -> None:
    """Install a settings instance as the global one"""
    global _settings
    _settings = settings


def reset_settings():
    """Reset global settings instance"""
    global _settings
    _settings = None
