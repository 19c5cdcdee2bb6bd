import os
from functools import lru_cache

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Settings(BaseSettings):
    """Runtime knobs, read from KRIGLAB_* environment variables or a .env file."""
    model_config = SettingsConfigDict(env_prefix="KRIGLAB_", env_file=".env", extra="ignore")

    threads: int = Field(0, ge=0)  # 0 = auto
    log_level: str = "INFO"
    truncation_tol: float = Field(1e-12, ge=0, lt=1)
    extended_dps: int = Field(250, ge=30)
    host: str = "0.0.0.0"
    port: int = 8001

    @property
    def max_workers(self) -> int:
        return self.threads or os.cpu_count() or 1


@lru_cache
def get_settings() -> Settings:
    return Settings()
