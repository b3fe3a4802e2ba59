"""
Инференс на разрешении модели: embed, extract, discriminate и
temporal_pooled_embed. Функции чистые: результат зависит только от
параметров и входов, bundle не изменяется.
"""

from __future__ import annotations

from typing import Union

import numpy as np

from core.exceptions import ShapeError, ValidationError
from models.bundle import ModelBundle
from models.discriminator import discriminator_forward
from models.embedder import TemporalPooling, embedder_forward
from models.extractor import extractor_forward
from models.layers import to_tensors
from ndgrad import Tensor
from schemas.model import BitMessage

MessageLike = Union[BitMessage, np.ndarray]


def _as_batch(image: np.ndarray, dtype: np.dtype) -> np.ndarray:
    array = np.asarray(image, dtype=dtype)
    if array.ndim == 3:
        array = array[None]
    if array.ndim != 4 or array.shape[1] != 3:
        raise ValidationError(
            "Ожидается изображение (3, H, W) или батч (B, 3, H, W)",
            {"shape": array.shape},
        )
    return array


def _check_model_res(bundle: ModelBundle, image: np.ndarray) -> None:
    res = bundle.arch.model_res
    if image.shape[2:] != (res, res):
        raise ValidationError(
            "Разрешение изображения не совпадает с разрешением модели",
            {"shape": image.shape, "model_res": res},
        )


def _message_rows(bundle: ModelBundle, message: MessageLike, batch: int) -> np.ndarray:
    if isinstance(message, BitMessage):
        rows = message.to_array(bundle.dtype)[None]
    else:
        rows = np.asarray(message, dtype=bundle.dtype)
        if rows.ndim == 1:
            rows = rows[None]
    if rows.shape[-1] != bundle.arch.n_bits:
        raise ValidationError(
            "Длина сообщения не совпадает с n_bits",
            {"n_bits": bundle.arch.n_bits, "got": rows.shape[-1]},
        )
    if rows.shape[0] not in (1, batch):
        raise ValidationError(
            "Число сообщений не совпадает с батчем",
            {"messages": rows.shape[0], "batch": batch},
        )
    return rows


def embed(bundle: ModelBundle, image: np.ndarray, message: MessageLike) -> np.ndarray:
    """
    Водяной знак w = Emb(x, m) на разрешении модели.

    Args:
        image: (3, r, r) или (B, 3, r, r) в [0, 1].
        message: BitMessage (одно на батч) или массив (n_bits,) / (B, n_bits).

    Returns:
        (B, 3, r, r) в [−1, 1].

    Raises:
        ValidationError: не то разрешение или длина сообщения.
    """
    batch = _as_batch(image, bundle.dtype)
    _check_model_res(bundle, batch)
    rows = _message_rows(bundle, message, batch.shape[0])
    params = to_tensors(bundle.embedder)
    return embedder_forward(params, Tensor(batch), Tensor(rows), bundle.arch).data


def extract(bundle: ModelBundle, image: np.ndarray) -> np.ndarray:
    """Мягкое сообщение (B, n_bits) ∈ [0, 1] по изображению разрешения модели."""
    batch = _as_batch(image, bundle.dtype)
    _check_model_res(bundle, batch)
    params = to_tensors(bundle.extractor)
    return extractor_forward(params, Tensor(batch), bundle.arch).data


def discriminate(bundle: ModelBundle, image: np.ndarray) -> np.ndarray:
    """Карта логитов (B, 1, ⌊H/16⌋, ⌊W/16⌋); любое разрешение ≥ рецептивного поля."""
    batch = _as_batch(image, bundle.dtype)
    params = to_tensors(bundle.discriminator)
    return discriminator_forward(params, Tensor(batch), bundle.arch).data


def temporal_pooled_embed(
    bundle: ModelBundle,
    frames: np.ndarray,
    message: MessageLike,
    k: int,
    d: int,
) -> np.ndarray:
    """
    Водяные знаки для T кадров с временным пулингом глубоких признаков.

    При k = 1 каждый кадр обрабатывается отдельно, как в embed.

    Raises:
        ShapeError: k < 1, d вне [0, depth] или пустая последовательность.
    """
    if k < 1:
        raise ShapeError("Размер временного окна k должен быть ≥ 1", {"k": k})
    if not 0 <= d <= bundle.arch.depth:
        raise ShapeError("Глубина пулинга вне диапазона", {"d": d, "depth": bundle.arch.depth})
    batch = _as_batch(frames, bundle.dtype)
    if batch.shape[0] < 1:
        raise ShapeError("Пустая последовательность кадров")
    _check_model_res(bundle, batch)
    rows = _message_rows(bundle, message, 1)

    if k == 1:
        return np.concatenate([embed(bundle, frame, rows) for frame in batch])

    params = to_tensors(bundle.embedder)
    pooling = TemporalPooling(k=k, d=d, frames=batch.shape[0])
    return embedder_forward(params, Tensor(batch), Tensor(rows), bundle.arch, pooling=pooling).data
