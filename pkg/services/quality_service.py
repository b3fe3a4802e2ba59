"""
JND-карта ослабления водяного знака и метрики качества PSNR/SSIM.

Все функции чистые и не зависят от состояния, их можно вызывать из
нескольких потоков.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import ndimage

from config.constants import (
    JND_BRIGHT_SLOPE,
    JND_DARK_KNEE,
    JND_LAMBDA_LUM,
    JND_LAMBDA_MIN,
    JND_LAMBDA_TEX,
    JND_TEXTURE_G0,
    JND_WINDOW,
    SSIM_C1,
    SSIM_C2,
    SSIM_SIGMA,
    SSIM_WINDOW,
)
from core.exceptions import ValidationError
from utils.color import luma


logger = logging.getLogger(__name__)

# Направленные операторы градиента 5×5 (горизонталь, две диагонали, вертикаль)
_DIRECTIONAL_KERNELS = np.array(
    [
        [[0, 0, 0, 0, 0], [1, 3, 8, 3, 1], [0, 0, 0, 0, 0], [-1, -3, -8, -3, -1], [0, 0, 0, 0, 0]],
        [[0, 0, 1, 0, 0], [0, 8, 3, 0, 0], [1, 3, 0, -3, -1], [0, 0, -3, -8, 0], [0, 0, -1, 0, 0]],
        [[0, 0, 1, 0, 0], [0, 0, 3, 8, 0], [-1, -3, 0, 3, 1], [0, -8, -3, 0, 0], [0, 0, -1, 0, 0]],
        [[0, 1, 0, -1, 0], [0, 3, 0, -3, 0], [0, 8, 0, -8, 0], [0, 3, 0, -3, 0], [0, 1, 0, -1, 0]],
    ],
    dtype=np.float64,
) / 16.0


def luminance_term(mean_luma: np.ndarray | float) -> np.ndarray:
    """
    L(ȳ): тёмные области терпят больше, светлые — чуть больше средних.

    1 − √(ȳ/0.3) при ȳ ≤ 0.3, иначе 0.2·(ȳ − 0.3)/0.7.
    """
    y = np.clip(np.asarray(mean_luma, dtype=np.float64), 0.0, 1.0)
    dark = 1.0 - np.sqrt(y / JND_DARK_KNEE)
    bright = JND_BRIGHT_SLOPE * (y - JND_DARK_KNEE) / (1.0 - JND_DARK_KNEE)
    return np.where(y <= JND_DARK_KNEE, dark, bright)


def texture_term(y: np.ndarray) -> np.ndarray:
    """T = min(1, g/g₀), g — максимум модулей четырёх направленных градиентов."""
    responses = [
        np.abs(ndimage.correlate(y, kernel, mode="reflect")) for kernel in _DIRECTIONAL_KERNELS
    ]
    return np.minimum(1.0, np.max(responses, axis=0) / JND_TEXTURE_G0)


def _jnd_plane(y: np.ndarray) -> np.ndarray:
    mean = ndimage.uniform_filter(y, size=JND_WINDOW, mode="reflect")
    value = (
        JND_LAMBDA_MIN
        + JND_LAMBDA_LUM * luminance_term(mean)
        + JND_LAMBDA_TEX * texture_term(y)
    )
    return np.clip(value, JND_LAMBDA_MIN, 1.0)


def jnd_map(image: np.ndarray) -> np.ndarray:
    """
    Карта допустимых изменений на исходном разрешении изображения.

    Args:
        image: (3, H, W) или (N, 3, H, W) в [0, 1].

    Returns:
        (H, W) или (N, H, W) со значениями в [λ_min, 1].

    Raises:
        ValidationError: нечисловые значения или не 3 канала.
    """
    array = np.asarray(image, dtype=np.float64)
    if array.ndim not in (3, 4) or array.shape[-3] != 3:
        raise ValidationError("jnd_map ожидает (3, H, W) или (N, 3, H, W)", {"shape": array.shape})
    if not np.all(np.isfinite(array)):
        raise ValidationError("jnd_map: нечисловые значения во входе")
    y = luma(array)
    if y.ndim == 2:
        return _jnd_plane(y)
    return np.stack([_jnd_plane(plane) for plane in y])


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError("Формы изображений не совпадают", {"a": a.shape, "b": b.shape})
    return a, b


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10·log10(1/MSE) для диапазона [0, 1]; одинаковые изображения → inf."""
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def _gaussian_window() -> np.ndarray:
    half = SSIM_WINDOW // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x**2) / (2.0 * SSIM_SIGMA**2))
    g /= g.sum()
    return np.outer(g, g)


def _ssim_plane(a: np.ndarray, b: np.ndarray, window: np.ndarray) -> float:
    half = SSIM_WINDOW // 2

    def local_mean(plane: np.ndarray) -> np.ndarray:
        return ndimage.correlate(plane, window, mode="reflect")[half:-half, half:-half]

    mu_a, mu_b = local_mean(a), local_mean(b)
    var_a = local_mean(a * a) - mu_a**2
    var_b = local_mean(b * b) - mu_b**2
    cov = local_mean(a * b) - mu_a * mu_b
    numerator = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    denominator = (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(numerator / denominator))


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """
    Средний локальный SSIM по яркости Rec.601 (окно 11×11, σ = 1.5).

    Для батча (N, 3, H, W) — среднее по изображениям.

    Raises:
        ValidationError: формы различаются или изображение меньше окна.
    """
    a, b = _check_pair(a, b)
    if a.ndim not in (3, 4) or a.shape[-3] != 3:
        raise ValidationError("ssim ожидает (3, H, W) или (N, 3, H, W)", {"shape": a.shape})
    if min(a.shape[-2:]) < SSIM_WINDOW:
        raise ValidationError(
            "Изображение меньше окна SSIM",
            {"shape": a.shape, "window": SSIM_WINDOW},
        )
    window = _gaussian_window()
    ya, yb = luma(a), luma(b)
    if ya.ndim == 2:
        return _ssim_plane(ya, yb, window)
    return float(np.mean([_ssim_plane(pa, pb, window) for pa, pb in zip(ya, yb)]))
