"""Runtime settings and logging setup."""

import logging
import sys
from functools import lru_cache
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class Settings(BaseSettings):
    """Environment-level settings (prefix THINMKT_, optional .env file)."""

    model_config = SettingsConfigDict(env_prefix="THINMKT_", env_file=".env", extra="ignore")

    seed: Optional[int] = Field(None, description="Overrides every config and plan seed when set")
    jobs: int = Field(1, ge=1, description="Default worker count for per-model fits")
    log_level: str = Field("WARNING", description="Root log level for the CLI")


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Return the process-wide settings (read once)."""
    return Settings()


def resolve_seed(configured: int) -> int:
    """Apply the THINMKT_SEED override to a configured seed."""
    override = get_settings().seed
    return configured if override is None else override


def configure_logging(level: Optional[str] = None) -> None:
    """Install a single stderr handler on the root logger."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel((level or get_settings().log_level).upper())
