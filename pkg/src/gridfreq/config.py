"""
Runtime settings read from the environment (and an optional .env file).
"""

import logging
import os
from functools import lru_cache
from typing import Any, Dict

from dotenv import load_dotenv
from pydantic import BaseModel, Field
from pydantic import ValidationError as PydanticValidationError

from .exceptions import ConfigurationError

ENV_PREFIX = "GRIDFREQ_"


class Settings(BaseModel):
    """Numerical defaults and process-level knobs."""

    threads: int = Field(default=1, ge=1, description="Batch parallelism cap")
    log_level: str = Field(default="WARNING", description="Root log level for the CLI")
    fd_step: float = Field(default=1e-6, gt=0, description="Central-difference step for linearize")
    eig_tol: float = Field(default=1e-9, gt=0, description="Eigenvalue tolerance for certificates")
    points_per_decade: int = Field(default=2000, ge=10, description="Sweep refinement density")
    epsilon: float = Field(default=1e-3, ge=0, description="Default supply-rate penalty weights")
    settle_tol: float = Field(default=1e-9, gt=0, description="Max |derivative| for settling")
    settle_window_s: float = Field(default=1.0, gt=0, description="Settling hold time")

    def configure_logging(self) -> None:
        """Apply ``log_level`` to the root logger."""
        level = logging.getLevelName(self.log_level.upper())
        if not isinstance(level, int):
            raise ConfigurationError(f"Unknown log level '{self.log_level}'")
        logging.basicConfig(
            level=level,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )


def _read_environment() -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for name in Settings.model_fields:
        raw = os.getenv(f"{ENV_PREFIX}{name.upper()}")
        if raw is not None and raw != "":
            values[name] = raw
    return values


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """
    Load settings once per process.

    Returns:
        Validated Settings instance

    Raises:
        ConfigurationError: When an environment value does not validate
    """
    load_dotenv()
    try:
        return Settings.model_validate(_read_environment())
    except PydanticValidationError as e:
        raise ConfigurationError(f"Invalid {ENV_PREFIX}* environment: {e}") from e
