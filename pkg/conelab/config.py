"""
conelab Configuration Management

Handles loading, validation and canonical serialization of scenario files.
"""

from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

ScenarioKind = Literal["decay", "eigen", "whitney", "flatness", "counterexample", "monotonicity"]
ConeName = Literal["P", "Y", "T"]
CrackName = Literal["P", "Y", "T", "tube", "empty", "file"]

# ============================================================================
# Configuration Models
# ============================================================================

class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScenarioSection(_Section):
    """What to run and where to put the results"""
    kind: ScenarioKind
    seed: int = Field(0, ge=0, lt=2**64)
    trials: int = Field(10, ge=1, le=1000)
    jobs: int = Field(1, ge=1, le=256)
    out: str = "results"


class GeometrySection(_Section):
    """Crack geometry"""
    cone: ConeName = "Y"
    crack: CrackName = "P"
    crack_file: Optional[str] = None
    resolution: int = Field(64, ge=32, le=512)
    dimension: Literal[2, 3] = 3
    wrinkles: int = Field(0, ge=0, le=64)

    @model_validator(mode="after")
    def _file_given(self) -> "GeometrySection":
        if self.crack == "file" and not self.crack_file:
            raise ValueError("crack: file needs crack_file")
        return self


class FlatnessSection(_Section):
    """Flatness certification thresholds"""
    eps0: float = Field(0.6, gt=0.0, le=1.0)
    eps: float = Field(0.01, gt=0.0, le=0.25)
    n_centers: int = Field(4, ge=1, le=1000)
    n_radii: int = Field(3, ge=1, le=32)
    n_starts: int = Field(8, ge=1, le=512)
    overlap_constant: float = Field(1.0, ge=1.0)


class DecaySection(_Section):
    """Energy decay experiment"""
    gamma: float = Field(0.75, gt=0.0, le=1.0)
    r: float = Field(0.5, gt=0.0, lt=1.0)
    radii: Optional[list[float]] = None
    tol: float = Field(0.05, ge=0.0, le=1.0)
    slack: float = Field(0.03, ge=0.0, le=1.0)
    degree: int = Field(3, ge=1, le=8)
    tube_eps: float = Field(0.15, gt=0.0, lt=0.5)
    tube_M: float = Field(1.0, gt=0.0)

    @field_validator("radii")
    @classmethod
    def _radii_in_ball(cls, v: Optional[list[float]]) -> Optional[list[float]]:
        if v is not None and (not v or any(not 0.0 < r < 1.0 for r in v)):
            raise ValueError("radii must be a non-empty list inside (0, 1)")
        return v


class SpectralSection(_Section):
    """Spherical eigenvalue runs"""
    target_h: float = Field(0.05, gt=0.0, le=1.0)
    bc: Literal["neumann", "mixed"] = "neumann"
    component: int = Field(0, ge=0, le=3)
    symmetry_axis: int = Field(0, ge=0, le=2)
    fields: int = Field(100, ge=0, le=10000)
    tol: float = Field(0.02, ge=0.0, le=1.0)


class WhitneySection(_Section):
    """Geometric function and cover"""
    U: float = Field(30.0, gt=0.0)
    rho: float = Field(0.625, ge=0.5, le=0.75)
    h: float = Field(0.2, gt=0.0, le=0.25)
    n_bad: int = Field(3, ge=0, le=64)
    n_probe: int = Field(2000, ge=10, le=10**6)
    overlap_bound: Optional[float] = Field(None, ge=1.0)
    energy: bool = True
    golden_C: float = Field(40.0, ge=0.0)


class LabConfig(_Section):
    """Complete scenario"""
    scenario: ScenarioSection
    geometry: GeometrySection = GeometrySection()
    flatness: FlatnessSection = FlatnessSection()
    decay: DecaySection = DecaySection()
    spectral: SpectralSection = SpectralSection()
    whitney: WhitneySection = WhitneySection()

    @model_validator(mode="after")
    def _whitney_constant(self) -> "LabConfig":
        if self.whitney.U < 30.0 * self.flatness.overlap_constant:
            raise ValueError(f"whitney.U must be at least 30 * overlap_constant ({30.0 * self.flatness.overlap_constant})")
        return self

    def with_overrides(self, **updates) -> "LabConfig":
        """Copy with scenario fields replaced, re-validated"""
        given = {k: v for k, v in updates.items() if v is not None}
        if not given:
            return self
        data = self.model_dump(mode="json")
        data["scenario"].update(given)
        return LabConfig.model_validate(data)

# ============================================================================
# Configuration Loader
# ============================================================================

DEFAULT_CONFIG_PATHS = [
    Path.home() / ".conelab" / "config.yaml",
    Path.home() / ".conelab" / "config.yml",
    Path.cwd() / "conelab.yaml",
    Path.cwd() / "conelab.yml",
]

def find_config_file() -> Optional[Path]:
    """Find configuration file in default locations"""
    for path in DEFAULT_CONFIG_PATHS:
        if path.exists():
            return path
    return None

def load_config_text(text: str) -> LabConfig:
    """Parse and validate a YAML scenario"""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"Malformed YAML: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("Scenario file must be a mapping of sections")
    try:
        return LabConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid scenario: {e}") from e

def load_config(config_path: Optional[Union[str, Path]] = None) -> LabConfig:
    """Load configuration from file"""

    # Determine config path
    if config_path:
        path = Path(config_path).expanduser()
    else:
        path = find_config_file()

    if not path or not path.exists():
        raise ConfigError(f"No scenario file found (looked at {config_path or [str(p) for p in DEFAULT_CONFIG_PATHS]})")

    return load_config_text(path.read_text())

def dump_config(cfg: LabConfig) -> str:
    """Canonical YAML form"""
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True, default_flow_style=False)
