from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process environment. Only log verbosity comes from here; every setting
    that shapes an artifact is a command-line flag."""

    log_level: str = "INFO"

    model_config = SettingsConfigDict(
        extra="ignore",
        env_prefix="PATCHPOISON_",
        env_file=".env",
        env_file_encoding="utf-8",
    )


@lru_cache
def get_settings() -> Settings:
    return Settings()
