"""
Бинарный формат чекпоинта.

    magic (8 байт "SEALKIT\\0") | version (u16 LE) | header_len (u32 LE) |
    header (JSON, UTF-8) | сырые тензоры (little-endian) | SHA-256 (32 байта)

Заголовок: архитектура, сводка состояния обучения, состояние RNG,
конфиг запуска и таблица тензоров (имя, dtype, форма, смещение, размер).
Контрольная сумма считается по всем байтам до неё.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from config.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from core.exceptions import CheckpointError
from models import ModelBundle
from schemas.model import ArchConfig


logger = logging.getLogger(__name__)

_PREFIX = struct.Struct("<8sHI")
_DIGEST_SIZE = 32
OPTIMIZER_PREFIX = "optim/"


@dataclass
class Checkpoint:
    """Содержимое чекпоинта."""

    bundle: ModelBundle
    train_state: Dict[str, Any] = field(default_factory=dict)
    optimizer_arrays: Dict[str, np.ndarray] = field(default_factory=dict)
    rng_state: Optional[Dict[str, Any]] = None
    run_config: Optional[Dict[str, Any]] = None


class CheckpointRepository:
    """Сохранение и загрузка чекпоинтов."""

    def save(self, path: Path, checkpoint: Checkpoint) -> Path:
        """
        Записать чекпоинт атомарно (через временный файл).

        Raises:
            CheckpointError: ошибка записи.
        """
        path = Path(path)
        arrays = dict(checkpoint.bundle.named_arrays())
        arrays.update({OPTIMIZER_PREFIX + k: v for k, v in checkpoint.optimizer_arrays.items()})

        table = []
        chunks = []
        offset = 0
        for name, array in arrays.items():
            data = np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<"))
            raw = data.tobytes()
            table.append(
                {
                    "name": name,
                    "dtype": data.dtype.str,
                    "shape": list(data.shape),
                    "offset": offset,
                    "nbytes": len(raw),
                }
            )
            chunks.append(raw)
            offset += len(raw)

        header = {
            "arch": checkpoint.bundle.arch.model_dump(),
            "train_state": checkpoint.train_state,
            "rng_state": checkpoint.rng_state,
            "run_config": checkpoint.run_config,
            "tensors": table,
        }
        header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
        prefix = _PREFIX.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(header_bytes))
        body = prefix + header_bytes + b"".join(chunks)
        payload = body + hashlib.sha256(body).digest()

        tmp = path.with_name(path.name + ".tmp")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp.write_bytes(payload)
            tmp.replace(path)
        except OSError as exc:
            logger.exception(f"Не удалось записать чекпоинт {path}")
            raise CheckpointError(
                "Не удалось записать чекпоинт",
                {"path": str(path), "error": str(exc)},
            ) from exc
        logger.info(f"Чекпоинт сохранён: {path} ({len(payload)} байт, {len(table)} тензоров)")
        return path

    def load(self, path: Path) -> Checkpoint:
        """
        Прочитать и проверить чекпоинт.

        Raises:
            CheckpointError: нет файла, неверный magic/версия, не сходится
                контрольная сумма или таблица тензоров.
        """
        path = Path(path)
        try:
            payload = path.read_bytes()
        except OSError as exc:
            raise CheckpointError(
                f"Не удалось прочитать чекпоинт: {path}",
                {"path": str(path)},
            ) from exc

        if len(payload) < _PREFIX.size + _DIGEST_SIZE:
            raise CheckpointError(
                "Файл слишком короткий для чекпоинта",
                {"path": str(path), "size": len(payload)},
            )
        magic, version, header_len = _PREFIX.unpack_from(payload)
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError("Файл не является чекпоинтом (magic)", {"path": str(path)})
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(
                "Неподдерживаемая версия чекпоинта",
                {"path": str(path), "version": version, "expected": CHECKPOINT_VERSION},
            )
        body, digest = payload[:-_DIGEST_SIZE], payload[-_DIGEST_SIZE:]
        if hashlib.sha256(body).digest() != digest:
            raise CheckpointError("Контрольная сумма чекпоинта не совпадает", {"path": str(path)})

        start = _PREFIX.size
        try:
            header = json.loads(body[start : start + header_len].decode("utf-8"))
            arch = ArchConfig.model_validate(header["arch"])
        except (ValueError, KeyError, PydanticValidationError) as exc:
            raise CheckpointError("Повреждённый заголовок чекпоинта", {"path": str(path)}) from exc

        data = body[start + header_len :]
        arrays: Dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            lo, hi = entry["offset"], entry["offset"] + entry["nbytes"]
            if hi > len(data):
                raise CheckpointError("Тензор выходит за пределы файла", {"name": entry["name"]})
            array = np.frombuffer(data[lo:hi], dtype=np.dtype(entry["dtype"]))
            native = array.dtype.newbyteorder("=")
            arrays[entry["name"]] = array.reshape(entry["shape"]).astype(native, copy=True)

        optimizer = {
            k[len(OPTIMIZER_PREFIX) :]: v
            for k, v in arrays.items()
            if k.startswith(OPTIMIZER_PREFIX)
        }
        params = {k: v for k, v in arrays.items() if not k.startswith(OPTIMIZER_PREFIX)}
        bundle = ModelBundle.from_named_arrays(arch, params)
        logger.info(f"Чекпоинт загружен: {path}")
        return Checkpoint(
            bundle=bundle,
            train_state=header.get("train_state") or {},
            optimizer_arrays=optimizer,
            rng_state=header.get("rng_state"),
            run_config=header.get("run_config"),
        )
