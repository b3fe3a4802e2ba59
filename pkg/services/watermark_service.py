"""
Встраивание и извлечение на произвольном разрешении.

Путь инференса: x → resize↓ до model_res → w = Emb(·, m) → resize↑ до
исходного размера → w ⊙ JND(x) → x_w = clamp(x + α·(…), 0, 1).
Извлечение: resize↓ атакованного изображения → Ext.
"""

from __future__ import annotations

import logging

import numpy as np

from core.exceptions import ValidationError
from models import ModelBundle, embed, extract, temporal_pooled_embed
from ndgrad import Tensor, resample
from schemas.model import BitMessage
from services.quality_service import jnd_map


logger = logging.getLogger(__name__)


def _check_image(image: np.ndarray) -> np.ndarray:
    array = np.asarray(image, dtype=np.float64)
    if array.ndim != 3 or array.shape[0] != 3:
        raise ValidationError("Ожидается изображение (3, H, W)", {"shape": array.shape})
    return array


def downscale(bundle: ModelBundle, image: np.ndarray) -> np.ndarray:
    """(3, H, W) → (3, r, r) в dtype модели."""
    res = bundle.arch.model_res
    batch = Tensor(np.asarray(image, dtype=bundle.dtype)[None])
    return resample.bilinear_resize(batch, res, res).data[0]


def compose(
    image: np.ndarray,
    watermark: np.ndarray,
    alpha: float,
    use_jnd: bool = True,
) -> np.ndarray:
    """
    x_w = clamp(x + α·resize↑(w) ⊙ JND(x)).

    Args:
        image: (3, H, W) исходное изображение.
        watermark: (3, r, r) водяной знак на разрешении модели.
    """
    h, w = image.shape[1:]
    batch = Tensor(np.asarray(watermark, dtype=np.float64)[None])
    upscaled = resample.bilinear_resize(batch, h, w).data[0]
    if use_jnd:
        upscaled = upscaled * jnd_map(image)[None]
    return np.clip(image + alpha * upscaled, 0.0, 1.0)


def embed_full_res(
    bundle: ModelBundle,
    image: np.ndarray,
    message: BitMessage,
    alpha: float,
    use_jnd: bool = True,
) -> np.ndarray:
    """Водяной знак на исходном разрешении; возвращает x_w (3, H, W) float64."""
    image = _check_image(image)
    low = downscale(bundle, image)
    watermark = embed(bundle, low, message)[0]
    return compose(image, watermark, alpha, use_jnd)


def extract_full_res(bundle: ModelBundle, image: np.ndarray) -> np.ndarray:
    """Мягкое сообщение (n_bits,) для изображения любого разрешения."""
    image = _check_image(image)
    return extract(bundle, downscale(bundle, image))[0].astype(np.float64)


def watermark_sequence(
    bundle: ModelBundle,
    frames: np.ndarray,
    message: BitMessage,
    alpha: float,
    k: int = 1,
    d: int = 1,
    use_jnd: bool = True,
) -> np.ndarray:
    """
    Водяной знак для видео (T, 3, H, W) с временным пулингом.

    При k = 1 совпадает бит в бит с покадровым embed_full_res.
    """
    frames = np.asarray(frames, dtype=np.float64)
    watermarks = temporal_pooled_embed(bundle, downscale_sequence(bundle, frames), message, k, d)
    return compose_sequence(frames, watermarks, alpha, use_jnd)


def downscale_sequence(bundle: ModelBundle, frames: np.ndarray) -> np.ndarray:
    """Кадры (T, 3, H, W) → (T, 3, r, r) на разрешении модели."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 4 or frames.shape[0] == 0:
        raise ValidationError(
            "Ожидается непустая последовательность (T, 3, H, W)",
            {"shape": frames.shape},
        )
    return np.stack([downscale(bundle, frame) for frame in frames])


def compose_sequence(
    frames: np.ndarray, watermarks: np.ndarray, alpha: float, use_jnd: bool = True
) -> np.ndarray:
    return np.stack([compose(frame, w, alpha, use_jnd) for frame, w in zip(frames, watermarks)])


def extract_sequence(bundle: ModelBundle, frames: np.ndarray) -> np.ndarray:
    """Мягкие сообщения по кадрам (T, n_bits)."""
    return np.stack([extract_full_res(bundle, frame) for frame in frames])


def average_soft(soft: np.ndarray) -> np.ndarray:
    """
    Среднее мягких сообщений по кадрам.

    Считается как s0 + mean(s − s0): одинаковые кадры дают ровно s0.
    """
    soft = np.asarray(soft, dtype=np.float64)
    first = soft[0]
    return first + (soft - first).sum(axis=0) / soft.shape[0]

