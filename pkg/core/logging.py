"""
Настройка логирования для всего приложения.

Консоль + файл в settings.paths.logs_dir. Структурированный лог обучения
пишется отдельно (repositories/training_log_repo.py).
"""

import logging
import sys

from config.settings import settings


_FORMAT = "[%(asctime)s] [%(levelname)-8s] %(name)s:%(lineno)d — %(message)s"


def setup_logging(level: str | None = None, to_file: bool = True) -> None:
    """
    Настроить корневой логгер.

    Args:
        level: уровень логирования; по умолчанию settings.log_level.
        to_file: писать ли дополнительно в logs/sealkit.log.
    """
    log_level = getattr(logging, (level or settings.log_level).upper(), logging.INFO)

    formatter = logging.Formatter(_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    # Повторный вызов не должен дублировать хендлеры
    for handler in list(root_logger.handlers):
        if getattr(handler, "_sealkit", False):
            root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    console_handler.setLevel(log_level)
    console_handler._sealkit = True
    root_logger.addHandler(console_handler)

    if to_file:
        log_dir = settings.paths.logs_dir
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_dir / "sealkit.log", encoding="utf-8")
        file_handler.setFormatter(formatter)
        file_handler.setLevel(log_level)
        file_handler._sealkit = True
        root_logger.addHandler(file_handler)

    # Отключаем лишние логи от сторонних библиотек
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    logging.getLogger("PIL").setLevel(logging.WARNING)
