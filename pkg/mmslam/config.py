"""
Scenario configuration.

Pydantic models for every tunable of a run, JSON loading with field-path
error reporting, and the default scenario: one elevated BS inside a square
room of four walls (one smooth, two medium-rough, one very rough) with the
vehicle orbiting the BS.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from mmslam.chanmodel import Environment, ScanConfig
from mmslam.gospa import GospaConfig
from mmslam.models import LandmarkType, SurfaceSpec, VehicleState
from mmslam.pmbm import DEFAULT_BIRTH_GATE, MapParams, PruningConfig
from mmslam.rbpf import DEFAULT_PROCESS_NOISE_STD


logger = logging.getLogger(__name__)

DEFAULT_INITIAL_TRUTH = [70.7285, 0.0, 0.0, np.pi / 2, 22.22, np.pi / 10, 300.0]
DEFAULT_PRIOR_BIAS = [0.9, 0.9, 0.0, 0.09, 0.0, 0.0, 0.9]
DEFAULT_PRIOR_STD = [1.0, 1.0, 0.0, 0.1, 0.2, 0.01, 1.0]

# Transmit/OFDM settings of the simulated link; no effect at the channel-parameter level
DEFAULT_METADATA = {
    "ofdm_symbols": "10x64",
    "subcarriers": 200,
    "subcarrier_spacing_hz": 0.5e6,
    "transmit_power_w": 5.05,
    "noise_psd_mw_per_hz": 4.0049e-9,
    "carrier_frequency_hz": 28e9,
    "array": "URA 8x8 at BS and vehicle",
}


class ConfigError(ValueError):
    """Invalid scenario configuration; the message lists offending field paths."""


class SurfaceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    point_on_plane: List[float] = Field(min_length=3, max_length=3)
    unit_normal: List[float] = Field(min_length=3, max_length=3)
    surface_type: LandmarkType

    @field_validator("unit_normal")
    @classmethod
    def check_unit_normal(cls, value: List[float]) -> List[float]:
        if abs(np.linalg.norm(value) - 1.0) > 1e-12:
            raise ValueError(f"must have unit length, got norm {np.linalg.norm(value)}")
        return value

    @field_validator("surface_type")
    @classmethod
    def check_surface_type(cls, value: LandmarkType) -> LandmarkType:
        if value == LandmarkType.BS:
            raise ValueError("a surface cannot have type BS")
        return value

    def to_spec(self) -> SurfaceSpec:
        return SurfaceSpec(self.point_on_plane, self.unit_normal, self.surface_type)


def _default_surfaces() -> List[SurfaceConfig]:
    walls = [
        ([80.0, 0.0, 0.0], [1.0, 0.0, 0.0], LandmarkType.SM),
        ([-80.0, 0.0, 0.0], [-1.0, 0.0, 0.0], LandmarkType.MR),
        ([0.0, 80.0, 0.0], [0.0, 1.0, 0.0], LandmarkType.MR),
        ([0.0, -80.0, 0.0], [0.0, -1.0, 0.0], LandmarkType.VR),
    ]
    return [SurfaceConfig(point_on_plane=p, unit_normal=n, surface_type=t) for p, n, t in walls]


class ScenarioConfig(BaseModel):
    """
    Every tunable of a run, with documented defaults.

    JSON keys are the field names; Q, p_S (and p_D inside scan) are accepted
    as aliases.
    """

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    bs_position: List[float] = Field(default_factory=lambda: [0.0, 0.0, 10.0], min_length=3, max_length=3)
    surfaces: List[SurfaceConfig] = Field(default_factory=_default_surfaces)
    initial_truth: List[float] = Field(default_factory=lambda: list(DEFAULT_INITIAL_TRUTH), min_length=7, max_length=7)
    initial_prior_bias: List[float] = Field(default_factory=lambda: list(DEFAULT_PRIOR_BIAS), min_length=7, max_length=7)
    initial_prior_std: List[float] = Field(default_factory=lambda: list(DEFAULT_PRIOR_STD), min_length=7, max_length=7)
    steps: int = Field(40, ge=1)
    dt: float = Field(0.5, gt=0.0)
    particle_count: int = Field(100, ge=1)
    process_noise: List[List[float]] = Field(
        default_factory=lambda: np.diag(np.square(DEFAULT_PROCESS_NOISE_STD)).tolist(), alias="Q"
    )
    survival_prob: float = Field(0.99, gt=0.0, le=1.0, alias="p_S")
    birth_weight: float = Field(1e-4, ge=0.0)
    birth_std: float = Field(5.0, gt=0.0)
    initial_undetected_weight: float = Field(1.0, ge=0.0)
    gate_threshold: Optional[float] = Field(1e4, gt=0.0)
    birth_gate: Optional[float] = Field(DEFAULT_BIRTH_GATE, gt=0.0)
    backprojection_floor: float = -40.0
    ess_threshold: float = Field(0.5, gt=0.0, le=1.0)
    scan: ScanConfig = Field(default_factory=ScanConfig)
    pruning: PruningConfig = Field(default_factory=PruningConfig)
    gospa: GospaConfig = Field(default_factory=GospaConfig)
    likelihood_mode: Literal["all_paths", "specular_only"] = "all_paths"
    seed: int = 0
    metadata: Dict[str, Any] = Field(default_factory=lambda: dict(DEFAULT_METADATA))

    @field_validator("initial_prior_std")
    @classmethod
    def check_prior_std(cls, value: List[float]) -> List[float]:
        if any(v < 0 for v in value):
            raise ValueError("standard deviations must be non-negative")
        return value

    @field_validator("initial_truth")
    @classmethod
    def check_initial_truth(cls, value: List[float]) -> List[float]:
        VehicleState.from_vector(value)
        return value

    @field_validator("process_noise")
    @classmethod
    def check_process_noise(cls, value: List[List[float]]) -> List[List[float]]:
        matrix = np.asarray(value, dtype=float)
        if matrix.shape != (6, 6):
            raise ValueError(f"must be 6x6 on (x, y, heading, speed, turn_rate, clock_bias), got shape {matrix.shape}")
        if not np.allclose(matrix, matrix.T) or np.min(np.linalg.eigvalsh(matrix)) < -1e-12:
            raise ValueError("must be symmetric positive semi-definite")
        return value

    def environment(self) -> Environment:
        return Environment(np.asarray(self.bs_position), [s.to_spec() for s in self.surfaces])

    def truth_state(self) -> VehicleState:
        return VehicleState.from_vector(self.initial_truth)

    def prior_mean(self) -> VehicleState:
        return VehicleState.from_vector(np.asarray(self.initial_truth) + np.asarray(self.initial_prior_bias))

    def map_params(self) -> MapParams:
        return MapParams(
            scan=self.scan,
            pruning=self.pruning,
            survival_prob=self.survival_prob,
            birth_weight=self.birth_weight,
            birth_std=self.birth_std,
            initial_undetected_weight=self.initial_undetected_weight,
            gate_threshold=self.gate_threshold,
            birth_gate=self.birth_gate,
        )

    def echo(self) -> Dict[str, Any]:
        """JSON-ready dump of the configuration using field names."""
        return self.model_dump(mode="json")


def default_scenario() -> ScenarioConfig:
    """The default scenario: BS at (0, 0, 10), walls at x, y = +-80 m, 40 steps of 0.5 s."""
    return ScenarioConfig()


def _format_validation_error(error: ValidationError) -> str:
    problems = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<root>"
        problems.append(f"{path}: {item['msg']}")
    return "; ".join(problems)


def parse_config(data: Dict[str, Any]) -> ScenarioConfig:
    """
    Validate a configuration mapping.

    Raises:
        ConfigError: listing every offending field path
    """
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {_format_validation_error(e)}") from e


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """
    Load a scenario configuration from a JSON file.

    Args:
        path: JSON file with ScenarioConfig field names

    Returns:
        ScenarioConfig: validated configuration

    Raises:
        ConfigError: unreadable file, malformed JSON or validation failure
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"Cannot read configuration {path}: {str(e)}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Malformed JSON in {path}: {str(e)}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"Configuration {path} must be a JSON object")
    config = parse_config(data)
    logger.info(f"Loaded configuration from {path} ({config.steps} steps, {config.likelihood_mode})")
    return config
