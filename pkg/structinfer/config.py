import logging
import os
from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

PACKAGED_PRESETS_DIR = Path(__file__).resolve().parent / "presets"


def get_base_dir() -> Path:
    """
    Returns the base directory for structinfer working files (logs, default outputs).
    Priority:
    1. STRUCTINFER_BASE_DIR environment variable
    2. Current working directory (default)
    """
    base_dir = os.environ.get("STRUCTINFER_BASE_DIR")
    if base_dir:
        return Path(os.path.expanduser(base_dir)).resolve()
    return Path.cwd()


class Settings(BaseSettings):
    """
    Runtime settings for structinfer.

    Values are read from environment variables with the ``STRUCTINFER_`` prefix and from a
    ``.env`` file. Experiment hyperparameters do not live here; they belong to
    :class:`structinfer.models.TrainConfig` and the YAML presets.
    """

    # Logging settings
    log_level: str = Field(default="INFO", description="Global logging level")
    console_log_level: str = Field(default="WARNING", description="Console logging level")
    log_file: str = Field(
        default=str(get_base_dir() / "structinfer.log"), description="Log file path"
    )

    # Run defaults
    default_seed: int = Field(default=7, description="Seed used when a command gets none")
    default_steps: int = Field(default=3, description="Default number of inference steps T")
    threads: int = Field(
        default=1, ge=1, description="Maximum worker threads for per-instance gradients"
    )

    # Gradient checking
    fd_epsilon: float = Field(
        default=1e-5, gt=0.0, description="Central finite-difference step for gradcheck"
    )
    gradcheck_tolerance: float = Field(
        default=1e-4, gt=0.0, description="Maximum accepted relative gradient error"
    )

    # Gate export
    gate_irrelevant_threshold: float = Field(
        default=0.2, description="Gates below this value are reported as irrelevant"
    )
    gate_useful_threshold: float = Field(
        default=0.7, description="Gates above this value are reported as useful"
    )

    preset_file: Optional[str] = Field(
        default=None,
        description="Path to a YAML preset used instead of the packaged reference preset",
    )

    model_config = SettingsConfigDict(
        env_prefix="STRUCTINFER_",
        case_sensitive=False,
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        validate_default=True,
    )

    def __init__(self, **data):
        env_preset = os.environ.get("STRUCTINFER_PRESET_FILE")
        if env_preset:
            data["preset_file"] = os.path.expanduser(env_preset)
            logger.debug(f"Set preset_file from environment: {data['preset_file']}")

        super().__init__(**data)

    @property
    def reference_preset_path(self) -> Path:
        """Path of the preset used when a command asks for the reference configuration."""
        if self.preset_file:
            return Path(self.preset_file)
        return PACKAGED_PRESETS_DIR / "reference.yml"

    def update(self, **kwargs) -> None:
        """
        Update settings with new values.

        Args:
            **kwargs: Settings to update
        """
        for key, value in kwargs.items():
            if hasattr(self, key):
                setattr(self, key, value)
                logger.debug(f"Updated setting {key} = {value}")
            else:
                logger.warning(f"Unknown setting: {key}")


# Create a global settings instance
try:
    settings = Settings()
    logger.info("Settings loaded successfully using Pydantic")
except Exception as e:
    logger.exception(f"Error loading settings: {e}")
    # Fallback to default settings
    settings = Settings.model_construct()
    logger.warning("Using default settings due to configuration error")
