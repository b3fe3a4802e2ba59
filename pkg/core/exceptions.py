"""
Кастомные исключения.

Позволяют различать типы ошибок и обрабатывать их осмысленно:
CLI переводит их в коды выхода, библиотечный код только бросает.
"""


class SealKitError(Exception):
    """Базовое исключение для всех ошибок приложения."""

    def __init__(self, message: str, details: dict | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ValidationError(SealKitError):
    """Ошибка валидации входных данных."""


class ShapeError(SealKitError):
    """Несовместимые формы тензоров."""


class GraphError(SealKitError):
    """Неправильное использование графа вычислений."""


class NumericError(SealKitError):
    """Нечисловые значения (NaN/inf) там, где их быть не должно."""


class ConfigurationError(SealKitError):
    """Ошибка конфигурации."""


class DataError(SealKitError):
    """Ошибка чтения/записи изображений и датасетов."""


class AttackError(SealKitError):
    """Неизвестная атака или недопустимые параметры."""


class CheckpointError(SealKitError):
    """Повреждённый или несовместимый чекпоинт."""


class TrainingError(SealKitError):
    """Обучение не может продолжаться."""


class ExternalCodecError(SealKitError):
    """Внешний кодек недоступен или завершился с ошибкой."""


class DatabaseError(SealKitError):
    """Ошибка работы с SQLite-историей запусков."""
