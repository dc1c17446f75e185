from pydantic_settings import BaseSettings
from typing import Optional


class Settings(BaseSettings):
    # Project
    PROJECT_NAME: str = "HCMEN"
    VERSION: str = "0.1.0"
    DESCRIPTION: str = "Hybrid CNN-Mamba enhancement network for multimodal sentiment analysis"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None

    # Monitoring Settings
    METRICS_ENABLED: bool = False
    METRICS_PORT: int = 9090

    # Evaluation
    EVAL_WORKERS: int = 1

    # Gradient checking
    GRADCHECK_TOLERANCE: float = 1e-5
    GRADCHECK_MODEL_TOLERANCE: float = 1e-4
    GRADCHECK_EPS: float = 1e-5
    GRADCHECK_SAMPLES: int = 6
    GRADCHECK_FLOOR: float = 1e-3

    # Scan benchmark
    BENCH_D_INNER: int = 16
    BENCH_D_STATE: int = 8

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()
