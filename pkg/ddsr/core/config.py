from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Environment
    env: str = Field(default="development", description="Environment (development/production)")

    # Logging
    log_level: str = Field(default="INFO", description="Logging level")
    log_file: Optional[Path] = Field(
        default=None, description="Optional log file; enables rotating file sinks"
    )

    # Execution
    threads: int = Field(default=1, ge=1, description="Worker processes for experiment trials")
    output_dir: Path = Field(default=Path("results"), description="Default output directory")
    default_seed: int = Field(default=0, ge=0, description="Master seed when none is given")
    max_grid_points: int = Field(
        default=2**21, ge=1, description="Upper bound on P*Q for grid scans"
    )

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="DDSR_",
        case_sensitive=False,
        env_file_encoding="utf-8",
        extra="ignore",
    )
