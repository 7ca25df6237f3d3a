"""Runtime configuration using Pydantic settings and YAML defaults."""

import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-level settings, read from ``SLICESCOPE_*`` environment variables."""

    APP_NAME: str = "SliceScope"
    THREADS: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None
    CONFIG_DIR: str = "config"

    # Algorithm defaults (loaded from config/defaults.yaml)
    DEFAULTS: Dict[str, Any] = {}

    model_config = SettingsConfigDict(
        env_prefix="SLICESCOPE_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )


def load_config_file(filepath: str) -> Dict[str, Any]:
    """Load YAML configuration file."""
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            return yaml.safe_load(f) or {}
    except FileNotFoundError:
        return {}


def defaults(section: str) -> Dict[str, Any]:
    """Return one section of the YAML defaults (empty when absent)."""
    value = settings.DEFAULTS.get(section) or {}
    return dict(value)


# Initialize settings
settings = Settings()
settings.DEFAULTS = load_config_file(str(Path(settings.CONFIG_DIR) / "defaults.yaml"))
