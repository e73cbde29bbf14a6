import os
from pathlib import Path
from typing import Literal

from pydantic import HttpUrl, computed_field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


def _default_threads() -> int:
    return max(1, os.cpu_count() or 1)


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="MMSVM_",
        env_ignore_empty=True,
        extra="ignore",
        env_file=".env",
    )
    PROJECT_NAME: str = "mmsvm"
    API_V1_STR: str = "/api/v1"
    ENVIRONMENT: Literal["local", "staging", "production"] = "local"
    SENTRY_DSN: HttpUrl | None = None
    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"

    # MMSVM_THREADS caps the number of benchmark cells trained concurrently
    THREADS: int = _default_threads()

    EPSILON_CURV: float = 1e-4
    SPARSITY_TAU: float = 1e-4
    OUTPUT_DIR: Path = Path("runs")

    @field_validator("THREADS")
    @classmethod
    def _positive_threads(cls, v: int) -> int:
        if v < 1:
            raise ValueError("MMSVM_THREADS must be at least 1")
        return v

    @field_validator("EPSILON_CURV", "SPARSITY_TAU")
    @classmethod
    def _positive_tolerance(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("tolerances must be strictly positive")
        return v

    @computed_field  # type: ignore[prop-decorator]
    @property
    def sentry_enabled(self) -> bool:
        return bool(self.SENTRY_DSN) and self.ENVIRONMENT != "local"


settings = Settings()
