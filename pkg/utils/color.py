"""
Цветовые матрицы: яркость Rec.601, YIQ, поворот тона, насыщенность.

Все матрицы 3×3 действуют на вектор RGB; к изображению они применяются
свёрткой 1×1 (см. services/attack_service.py).
"""

import numpy as np

from config.constants import LUMA_WEIGHTS

RGB_TO_YIQ = np.array(
    [
        [0.299, 0.587, 0.114],
        [0.595716, -0.274453, -0.321263],
        [0.211456, -0.522591, 0.311135],
    ]
)
YIQ_TO_RGB = np.linalg.inv(RGB_TO_YIQ)


def luma(image: np.ndarray) -> np.ndarray:
    """Яркость (..., 3, H, W) → (..., H, W)."""
    r, g, b = (image[..., c, :, :] for c in range(3))
    wr, wg, wb = LUMA_WEIGHTS
    return wr * r + wg * g + wb * b


def hue_matrix(shift: float) -> np.ndarray:
    """
    Поворот плоскости цветности IQ на угол 2π·shift.

    Матрица обратима: hue(−s)·hue(s) = I. Через атаку с клампом в [0, 1]
    сдвиг туда и обратно возвращает вход только пока повёрнутые цвета
    остаются в гамме RGB (малая насыщенность).
    """
    theta = 2.0 * np.pi * shift
    cos, sin = np.cos(theta), np.sin(theta)
    rotation = np.array([[1.0, 0.0, 0.0], [0.0, cos, -sin], [0.0, sin, cos]])
    return YIQ_TO_RGB @ rotation @ RGB_TO_YIQ


def grayscale_matrix() -> np.ndarray:
    """Каждый канал заменяется яркостью."""
    return np.tile(np.asarray(LUMA_WEIGHTS, dtype=np.float64), (3, 1))


def saturation_matrix(factor: float) -> np.ndarray:
    """luma + factor·(x − luma)."""
    return factor * np.eye(3) + (1.0 - factor) * grayscale_matrix()


def is_gray(image: np.ndarray) -> bool:
    """Все три канала совпадают поэлементно."""
    return bool(
        np.array_equal(image[..., 0, :, :], image[..., 1, :, :])
        and np.array_equal(image[..., 1, :, :], image[..., 2, :, :])
    )
