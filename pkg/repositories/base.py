"""
Общая основа SQLite-репозиториев: соединение на одну операцию.
"""

import logging
import sqlite3
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List

from config.settings import settings
from core.exceptions import DatabaseError


logger = logging.getLogger(__name__)

Params = tuple | dict | None


class BaseRepository:
    """SQLite-файл + методы чтения/записи с переводом ошибок в DatabaseError."""

    def __init__(self, db_path: Path | None = None) -> None:
        """
        Args:
            db_path: путь к файлу БД; по умолчанию settings.paths.db_path.
        """
        self.db_path = Path(db_path or settings.paths.db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)

    @contextmanager
    def _connection(self) -> Iterator[sqlite3.Connection]:
        """Соединение закрывается в любом случае, при ошибке — откат."""
        try:
            conn = sqlite3.connect(self.db_path)
        except sqlite3.Error as exc:
            logger.exception(f"Не удалось открыть БД {self.db_path}")
            raise DatabaseError(
                "Не удалось открыть базу данных",
                {"db_path": str(self.db_path)},
            ) from exc
        conn.row_factory = sqlite3.Row
        try:
            yield conn
        except sqlite3.Error:
            conn.rollback()
            raise
        finally:
            conn.close()

    def _run(
        self, query: str, params: Params, commit: bool
    ) -> tuple[sqlite3.Cursor, List[sqlite3.Row]]:
        with self._connection() as conn:
            try:
                cursor = conn.execute(query, params or ())
                rows = cursor.fetchall()
                if commit:
                    conn.commit()
            except sqlite3.Error as exc:
                logger.exception(f"Ошибка SQL: {query.strip().splitlines()[0]}")
                raise DatabaseError(
                    "Ошибка выполнения SQL",
                    {"query": query, "error": str(exc)},
                ) from exc
            return cursor, rows

    def execute(self, query: str, params: Params = None, commit: bool = False) -> List[sqlite3.Row]:
        """
        Выполнить запрос и вернуть строки результата.

        Raises:
            DatabaseError: ошибка SQLite.
        """
        _, rows = self._run(query, params, commit)
        return rows

    def execute_write(self, query: str, params: Params = None) -> int:
        """INSERT/UPDATE с commit; возвращает lastrowid."""
        cursor, _ = self._run(query, params, commit=True)
        return cursor.lastrowid or 0
