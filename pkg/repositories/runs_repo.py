"""
История запусков команд (train/evaluate/video/ablate) в SQLite.
"""

import json
import logging
from datetime import datetime
from typing import Any, Dict, List, Optional

from repositories.base import BaseRepository


logger = logging.getLogger(__name__)


class RunsRepository(BaseRepository):
    """Одна строка на запуск команды."""

    def create_table(self) -> None:
        query = """
        CREATE TABLE IF NOT EXISTS runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            command TEXT NOT NULL,
            seed INTEGER NOT NULL,
            config_hash TEXT,
            started_at TEXT NOT NULL,
            finished_at TEXT,
            status TEXT NOT NULL DEFAULT 'running',
            summary TEXT
        );
        """
        self.execute(query, commit=True)

    def start_run(self, command: str, seed: int, config_hash: Optional[str] = None) -> int:
        """
        Зарегистрировать начало запуска.

        Returns:
            ID записи.
        """
        record_id = self.execute_write(
            "INSERT INTO runs (command, seed, config_hash, started_at) VALUES (?, ?, ?, ?)",
            (command, seed, config_hash, datetime.now().isoformat()),
        )
        logger.debug(f"Запуск {command} зарегистрирован, run_id={record_id}")
        return record_id

    def finish_run(
        self, record_id: int, status: str, summary: Optional[Dict[str, Any]] = None
    ) -> None:
        self.execute_write(
            "UPDATE runs SET finished_at = ?, status = ?, summary = ? WHERE id = ?",
            (
                datetime.now().isoformat(),
                status,
                json.dumps(summary or {}, sort_keys=True, default=str),
                record_id,
            ),
        )
        logger.debug(f"Запуск {record_id} завершён со статусом {status}")

    def list_runs(self, command: Optional[str] = None, limit: int = 50) -> List[Dict[str, Any]]:
        """Последние запуски (новые первыми)."""
        if command is None:
            rows = self.execute("SELECT * FROM runs ORDER BY id DESC LIMIT ?", (limit,))
        else:
            rows = self.execute(
                "SELECT * FROM runs WHERE command = ? ORDER BY id DESC LIMIT ?", (command, limit)
            )
        result = []
        for row in rows:
            item = dict(row)
            item["summary"] = json.loads(item["summary"]) if item["summary"] else None
            result.append(item)
        return result
