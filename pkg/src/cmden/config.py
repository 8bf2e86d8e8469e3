"""Configuration management for cmden."""

import json
import logging
from pathlib import Path
from typing import Optional

from pydantic import AliasChoices, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from cmden.optimization.adam import OptimizerConfig

logger = logging.getLogger(__name__)

CONFIG_KEY = "cmden"


class GradcheckConfig(BaseSettings):
    """Finite-difference gradient check settings."""

    size: int = Field(default=16, ge=4, description="Side of the square test image")
    probes: int = Field(default=200, ge=1, description="Probed coordinates per stage")
    seed: int = Field(default=0, description="Seed for inputs and probe selection")
    epsilon: float = Field(default=1e-5, gt=0, description="Central-difference step")
    tolerance: float = Field(default=1e-4, gt=0, description="Maximum relative error")


class DemoConfig(BaseSettings):
    """Synthetic three-band cascade experiment."""

    layers: int = Field(default=3, ge=1, description="Cascade layers; 1 runs the baseline only")
    xi: int = Field(default=2, ge=1, description="Base of the frame-interval rule")
    height: int = Field(default=48, ge=8)
    width: int = Field(default=64, ge=8)
    frames: int = Field(default=9, ge=3, description="Frames rendered around the target")
    seed: int = Field(default=0)
    iterations: int = Field(default=400, ge=1, description="Optimizer iterations per stage")
    scales: int = Field(default=2, ge=1, description="Pyramid levels of the sigma field")
    min_depth: float = Field(default=10.0, gt=0)
    max_depth: float = Field(default=100.0, gt=0)
    baseline: float = Field(default=0.5, gt=0, description="Camera translation per frame")
    bands: list[float] = Field(
        default_factory=lambda: [0.0, 30.0, 60.0, 80.0],
        description="Depth band edges of the synthetic scene",
    )
    noise_std: float = Field(default=0.0, ge=0, description="Per-frame sensor noise")


class EvaluationConfig(BaseSettings):
    """Depth evaluation protocol."""

    cap: float = Field(default=80.0, gt=0, description="Depth cap in meters")
    median_scale: bool = Field(default=True, description="Rescale predictions by median ratio")
    bins: list[float] = Field(
        default_factory=lambda: [0.0, 30.0, 60.0, 80.0],
        description="Ground-truth depth bin edges for binned accuracy",
    )

    @field_validator("bins")
    @classmethod
    def _increasing(cls, value: list[float]) -> list[float]:
        if len(value) < 2 or any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError(f"bins must be at least two strictly increasing edges, got {value}")
        return value


class Settings(BaseSettings):
    """Main cmden settings."""

    model_config = SettingsConfigDict(
        env_prefix="CMDEN_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        populate_by_name=True,
    )

    gradcheck: GradcheckConfig = Field(default_factory=GradcheckConfig)
    demo: DemoConfig = Field(default_factory=DemoConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)

    threads: int = Field(
        default=1,
        ge=1,
        validation_alias=AliasChoices("threads", "CMDEN_THREADS"),
        description="Worker threads for independent cascade layers",
    )
    output_dir: str = Field(default="./cmden_output", description="Default artifact directory")

    log_level: str = Field(default="INFO", description="Logging level")
    verbose: bool = Field(default=False, description="Enable verbose output")

    def get_output_dir(self) -> Path:
        """Get expanded output directory."""
        return Path(self.output_dir).expanduser()


def _read_config_file(config_file: Path) -> dict:
    text = config_file.read_text()
    if config_file.suffix.lower() == ".json":
        return json.loads(text) or {}
    import yaml

    return yaml.safe_load(text) or {}


def load_settings(config_file: Optional[Path] = None) -> Settings:
    """Load settings from environment and an optional YAML or JSON file.

    Values under the file's top-level ``cmden`` key override the
    environment.
    """
    settings = Settings()

    if config_file and config_file.exists():
        config_data = _read_config_file(config_file)
        if CONFIG_KEY in config_data:
            settings = Settings(**config_data[CONFIG_KEY])
        else:
            logger.warning(f"{config_file} has no '{CONFIG_KEY}' section; using defaults")

    return settings


# Global settings instance (lazy loaded)
_settings: Optional[Settings] = None
_settings_config_path: Optional[Path] = None


def _normalize_config_path(config_file: Optional[Path]) -> Optional[Path]:
    if config_file is None:
        return None
    return config_file.expanduser().resolve()


def get_settings(config_file: Optional[Path] = None, force_reload: bool = False) -> Settings:
    """Get the global settings instance.

    Args:
        config_file: Optional YAML/JSON config path to merge into settings.
        force_reload: Force reload from environment/config even if cached.
    """
    global _settings
    global _settings_config_path

    normalized_config = _normalize_config_path(config_file)
    should_reload = (
        force_reload
        or _settings is None
        or (normalized_config is not None and normalized_config != _settings_config_path)
    )

    if should_reload:
        _settings = load_settings(normalized_config)
        _settings_config_path = normalized_config
    return _settings
