"""
Настройки процесса через Pydantic Settings.

Читает из .env и переменных окружения (префикс SEALKIT_), с fallback на дефолты.
Гиперпараметры обучения сюда не входят — они живут в RunConfig (schemas/training.py).
"""

from pathlib import Path
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Paths(BaseSettings):
    """Пути к рабочим директориям."""

    model_config = SettingsConfigDict(env_prefix="SEALKIT_PATHS__")

    runs_dir: Path = Field(default=Path("data/runs"))
    logs_dir: Path = Field(default=Path("logs"))
    db_path: Path = Field(default=Path("data/runs.db"))

    @field_validator("runs_dir", "logs_dir")
    @classmethod
    def create_if_not_exists(cls, v: Path) -> Path:
        """Создать директорию, если её нет."""
        v.mkdir(parents=True, exist_ok=True)
        return v


class Settings(BaseSettings):
    """Главный конфиг процесса."""

    model_config = SettingsConfigDict(
        env_prefix="SEALKIT_",
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        case_sensitive=False,
    )

    paths: Paths = Field(default_factory=Paths)

    log_level: str = Field(default="INFO")
    threads: int = Field(default=1, ge=1, le=256)

    # Внешний кодек для видео-атак (H.264/H.265). None — записи пропускаются.
    external_encoder: Optional[str] = Field(default=None)

    # Записывать ли историю запусков в SQLite
    record_history: bool = Field(default=True)


# Singleton
settings = Settings()
