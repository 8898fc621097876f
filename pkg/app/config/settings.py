from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        extra="ignore",
    )

    # Runtime
    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: Path = Path("runs")
    WORKER_THREADS: int = Field(default=4, ge=1)
    DEFAULT_SEED: int = 0

    # Numerical tolerances
    WELD_TOL: float = 1e-8
    GROUP_QUANTUM: float = 1e-9
    MAX_MK: int = 32

    # Local paths
    PRESET_DIR: Path = Path(__file__).resolve().parents[1] / "presets" / "registry"


settings = Settings()
