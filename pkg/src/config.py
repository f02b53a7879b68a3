"""
Configuration for the FAE toolkit
"""
import os
from pydantic_settings import BaseSettings
from functools import lru_cache


class Settings(BaseSettings):
    """Toolkit settings from environment variables."""

    # Logging
    log_level: str = os.getenv("FAE_LOG_LEVEL", "INFO")
    log_every: int = int(os.getenv("FAE_LOG_EVERY", "100"))  # epochs between training log lines

    # Reproducibility / parallelism
    seed: int = int(os.getenv("FAE_SEED", "0"))
    jobs: int = int(os.getenv("FAE_JOBS", "1"))

    # Numerical defaults
    gram_resolution: int = int(os.getenv("FAE_GRAM_RESOLUTION", "10001"))
    smoothing_ridge: float = float(os.getenv("FAE_SMOOTHING_RIDGE", "1e-9"))

    # Downstream classifier
    logreg_l2: float = float(os.getenv("FAE_LOGREG_L2", "1e-4"))
    logreg_iterations: int = int(os.getenv("FAE_LOGREG_ITERATIONS", "500"))
    logreg_learning_rate: float = float(os.getenv("FAE_LOGREG_LEARNING_RATE", "0.05"))

    # Artifacts
    output_dir: str = os.getenv("FAE_OUTPUT_DIR", "out")
    config_schema_version: int = 1

    class Config:
        env_file = ".env"
        extra = "allow"


@lru_cache()
def get_settings() -> Settings:
    return Settings()
