"""
Configuration Management for perctrunc
"""
import os
from functools import lru_cache
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


def _default_threads() -> int:
    return os.cpu_count() or 1


class Settings(BaseSettings):
    """Toolkit settings with environment variable support (prefix PERCTRUNC_)"""

    model_config = SettingsConfigDict(
        env_prefix="PERCTRUNC_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = "perctrunc"
    app_version: str = "1.0.0"
    environment: str = "production"

    # Parallel trial fan-out
    threads: int = Field(default_factory=_default_threads)

    # Logging
    log_level: str = "INFO"
    log_file: Optional[str] = None
    json_logging: bool = False

    # Numerics
    default_horizon: int = 10**6
    oriented_site_threshold: float = 0.7055  # empirical reference, see site-threshold
    confidence: float = 0.95

    # Output
    metrics_file: Optional[str] = None

    @field_validator("environment")
    @classmethod
    def validate_environment(cls, v: str) -> str:
        allowed = ["development", "testing", "production"]
        if v not in allowed:
            raise ValueError(f"Environment must be one of {allowed}")
        return v

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        allowed = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in allowed:
            raise ValueError(f"Log level must be one of {allowed}")
        return v.upper()

    @field_validator("threads")
    @classmethod
    def validate_threads(cls, v: int) -> int:
        if v < 1:
            raise ValueError("threads must be at least 1")
        return v

    @field_validator("confidence")
    @classmethod
    def validate_confidence(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        return v

    @field_validator("default_horizon")
    @classmethod
    def validate_horizon(cls, v: int) -> int:
        if v < 1:
            raise ValueError("default_horizon must be positive")
        return v


class DevelopmentSettings(Settings):
    """Development environment settings"""
    environment: str = "development"
    log_level: str = "DEBUG"


class TestingSettings(Settings):
    """Testing environment settings"""
    environment: str = "testing"
    log_level: str = "WARNING"
    threads: int = 1
    default_horizon: int = 10**5


class ProductionSettings(Settings):
    """Production environment settings"""
    environment: str = "production"
    log_level: str = "INFO"


@lru_cache()
def get_settings() -> Settings:
    """Get toolkit settings (cached)"""
    environment = os.getenv("PERCTRUNC_ENVIRONMENT", "production").lower()

    if environment == "development":
        return DevelopmentSettings()
    elif environment == "testing":
        return TestingSettings()
    elif environment == "production":
        return ProductionSettings()
    else:
        return Settings()
