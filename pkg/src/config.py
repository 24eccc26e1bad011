from __future__ import annotations

from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="BAYES_CANCEL_", env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )

    # Upper bound on chains sampled in parallel; None -> one worker per CPU.
    threads: int | None = None
    log_level: str = "INFO"


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
