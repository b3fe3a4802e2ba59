"""
Структурированный лог обучения: по одной JSON-записи TrainRecord на строку.

Времени в записях нет: два запуска с одним seed дают одинаковые файлы.
"""

import logging
from pathlib import Path
from typing import List

from pydantic import ValidationError as PydanticValidationError

from core.exceptions import DataError
from schemas.training import TrainRecord


logger = logging.getLogger(__name__)


class TrainingLogRepository:
    """Дозапись и чтение JSONL-лога."""

    def __init__(self, path: Path) -> None:
        self.path = Path(path)

    def reset(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")

    def append(self, record: TrainRecord) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(record.model_dump_json(exclude_none=True) + "\n")

    def truncate_after(self, step: int) -> None:
        """
        Отбросить записи, сделанные после чекпоинта на шаге step.

        Запись шага хранит номер до инкремента, запись стадии — после.
        """
        if not self.path.exists():
            return
        kept = [r for r in self.read() if r.step < step or (r.kind != "step" and r.step == step)]
        self.reset()
        for record in kept:
            self.append(record)

    def read(self) -> List[TrainRecord]:
        """
        Raises:
            DataError: файла нет или строка не разбирается.
        """
        if not self.path.is_file():
            raise DataError(f"Лог обучения не найден: {self.path}", {"path": str(self.path)})
        records = []
        for lineno, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                records.append(TrainRecord.model_validate_json(line))
            except PydanticValidationError as exc:
                raise DataError(
                    "Повреждённая строка лога обучения",
                    {"path": str(self.path), "line": lineno},
                ) from exc
        return records
