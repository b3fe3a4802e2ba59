"""
Детерминированный JPEG-подобный кодек без энтропийного кодирования.

RGB → YCbCr (BT.601, full range), 4:2:0 (среднее 2×2), DCT-II блоками 8×8,
квантование таблицами Annex K с законом качества libjpeg, округление,
обратное преобразование, nearest-апсемплинг цветности, 8-битный выход.
"""

from functools import lru_cache

import numpy as np

from config.constants import JPEG_CHROMA_TABLE, JPEG_LUMA_TABLE
from core.exceptions import AttackError, ShapeError

BLOCK = 8
MACRO = 16


@lru_cache(maxsize=1)
def dct_matrix() -> np.ndarray:
    """Ортонормированная матрица DCT-II 8×8: coef = D · block · Dᵀ."""
    k = np.arange(BLOCK)[:, None]
    n = np.arange(BLOCK)[None, :]
    matrix = np.sqrt(2.0 / BLOCK) * np.cos(np.pi * (2 * n + 1) * k / (2 * BLOCK))
    matrix[0] /= np.sqrt(2.0)
    matrix.setflags(write=False)
    return matrix


@lru_cache(maxsize=128)
def quant_tables(quality: int) -> tuple[np.ndarray, np.ndarray]:
    """Таблицы квантования (яркость, цветность) для качества 1..100."""
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    tables = []
    for base in (JPEG_LUMA_TABLE, JPEG_CHROMA_TABLE):
        table = np.floor((np.asarray(base, dtype=np.int64) * scale + 50) / 100)
        table = np.clip(table, 1, 255).astype(np.float64)
        table.setflags(write=False)
        tables.append(table)
    return tables[0], tables[1]


def rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    """(..., 3, H, W) в шкале 0..255."""
    r, g, b = rgb[..., 0, :, :], rgb[..., 1, :, :], rgb[..., 2, :, :]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    return np.stack([y, cb, cr], axis=-3)


def ycbcr_to_rgb(ycc: np.ndarray) -> np.ndarray:
    y, cb, cr = ycc[..., 0, :, :], ycc[..., 1, :, :] - 128.0, ycc[..., 2, :, :] - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return np.stack([r, g, b], axis=-3)


def _blockwise(plane: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Квантование/деквантование плоскости (N, H, W), H и W кратны 8."""
    n, h, w = plane.shape
    d = dct_matrix()
    blocks = (plane - 128.0).reshape(n, h // BLOCK, BLOCK, w // BLOCK, BLOCK)
    blocks = blocks.transpose(0, 1, 3, 2, 4)
    coef = d @ blocks @ d.T
    coef = np.round(coef / table) * table
    restored = d.T @ coef @ d
    return restored.transpose(0, 1, 3, 2, 4).reshape(n, h, w) + 128.0


def jpeg_like(image: np.ndarray, quality: float) -> np.ndarray:
    """
    Сжать и восстановить изображение.

    Args:
        image: (3, H, W) или (N, 3, H, W) в [0, 1].
        quality: 1..100.

    Returns:
        Массив той же формы с 8-битными значениями /255.

    Raises:
        AttackError: качество вне [1, 100].
        ShapeError: не 3 канала.
    """
    if not 1 <= quality <= 100:
        raise AttackError("Качество JPEG должно быть в [1, 100]", {"quality": quality})
    array = np.asarray(image, dtype=np.float64)
    squeeze = array.ndim == 3
    if squeeze:
        array = array[None]
    if array.ndim != 4 or array.shape[1] != 3:
        raise ShapeError("jpeg_like ожидает (N, 3, H, W)", {"shape": array.shape})

    n, _, h, w = array.shape
    pad_h, pad_w = (-h) % MACRO, (-w) % MACRO
    mode = "reflect" if min(h, w) > 1 else "edge"
    padded = np.pad(
        np.clip(array, 0.0, 1.0) * 255.0, ((0, 0), (0, 0), (0, pad_h), (0, pad_w)), mode=mode
    )
    hp, wp = padded.shape[2:]

    luma_table, chroma_table = quant_tables(int(round(quality)))
    ycc = rgb_to_ycbcr(padded)
    y = _blockwise(ycc[:, 0], luma_table)

    chroma = ycc[:, 1:].reshape(n, 2, hp // 2, 2, wp // 2, 2).mean(axis=(3, 5))
    chroma = _blockwise(chroma.reshape(n * 2, hp // 2, wp // 2), chroma_table)
    chroma = chroma.reshape(n, 2, hp // 2, wp // 2)
    chroma = np.repeat(np.repeat(chroma, 2, axis=2), 2, axis=3)

    rgb = ycbcr_to_rgb(np.concatenate([y[:, None], chroma], axis=1))
    out = np.round(np.clip(rgb, 0.0, 255.0))[:, :, :h, :w] / 255.0
    return out[0] if squeeze else out
