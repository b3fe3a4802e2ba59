"""
Пространственная передискретизация: билинейный ресайз, гомографический варп,
отражение, поворот на 90°, вырезка.

Координаты пикселей — центры (align_corners=False): пиксель i занимает
[i, i+1), его центр в i + 0.5.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Tuple

import numpy as np

from core.exceptions import ShapeError
from ndgrad import ops
from ndgrad.tensor import Tensor, make_result


@lru_cache(maxsize=256)
def _interp_matrix(size_in: int, size_out: int, dtype_name: str) -> np.ndarray:
    """Матрица (size_out, size_in) линейной интерполяции по одной оси."""
    scale = size_in / size_out
    src = (np.arange(size_out) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, size_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, size_in - 1)
    frac = src - i0
    matrix = np.zeros((size_out, size_in), dtype=np.float64)
    rows = np.arange(size_out)
    np.add.at(matrix, (rows, i0), 1.0 - frac)
    np.add.at(matrix, (rows, i1), frac)
    matrix.setflags(write=False)
    return matrix.astype(dtype_name)


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """
    Билинейный ресайз (N, C, H, W) → (N, C, out_h, out_w).

    Ресайз к тому же размеру — тождество (бит в бит).

    Raises:
        ShapeError: нулевой или отрицательный целевой размер.
    """
    if x.ndim != 4:
        raise ShapeError("bilinear_resize ожидает (N, C, H, W)", {"shape": x.shape})
    if out_h < 1 or out_w < 1:
        raise ShapeError("bilinear_resize: размер должен быть ≥ 1", {"out": (out_h, out_w)})
    h, w = x.shape[2:]
    if (h, w) == (out_h, out_w):
        return make_result(x.data.copy(), (x,), lambda g: (g,))

    rh = _interp_matrix(h, out_h, x.dtype.name)
    rw = _interp_matrix(w, out_w, x.dtype.name)
    value = rh @ x.data @ rw.T

    def backward(g: np.ndarray):
        return (rh.T @ g @ rw,)

    return make_result(value, (x,), backward)


def flip_horizontal(x: Tensor) -> Tensor:
    width = x.shape[-1]
    return ops.take(x, np.arange(width - 1, -1, -1), axis=x.ndim - 1)


def rot90(x: Tensor, turns: int) -> Tensor:
    """Поворот на 90°·turns против часовой стрелки — перестановка пикселей."""
    turns %= 4
    if turns == 0:
        return make_result(x.data.copy(), (x,), lambda g: (g,))
    value = np.ascontiguousarray(np.rot90(x.data, turns, axes=(2, 3)))
    return make_result(value, (x,), lambda g: (np.rot90(g, -turns, axes=(2, 3)),))


def crop(x: Tensor, top: int, left: int, height: int, width: int) -> Tensor:
    """Прямоугольная вырезка (градиент вне области — нули)."""
    h, w = x.shape[2:]
    if height < 1 or width < 1 or top < 0 or left < 0 or top + height > h or left + width > w:
        raise ShapeError(
            "crop: область выходит за границы",
            {"shape": x.shape, "box": (top, left, height, width)},
        )
    rows, cols = slice(top, top + height), slice(left, left + width)
    return ops.getitem(x, (slice(None), slice(None), rows, cols))


# --- гомографии -------------------------------------------------------------


def homography_from_points(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """
    Гомография H (3×3), переводящая 4 точки src в dst.

    Raises:
        ShapeError: точки вырождены (матрица системы необратима).
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    if np.linalg.cond(a) > 1e12:
        raise ShapeError("Вырожденная гомография", {"src": src.tolist(), "dst": dst.tolist()})
    h = np.linalg.solve(a, b)
    return np.append(h, 1.0).reshape(3, 3)


def rotation_homography(angle_deg: float, height: int, width: int) -> np.ndarray:
    """Поворот вокруг центра кадра на angle° против часовой стрелки (ось y вниз)."""
    theta = np.deg2rad(angle_deg)
    cy, cx = height / 2.0, width / 2.0
    cos, sin = np.cos(theta), np.sin(theta)
    to_origin = np.array([[1, 0, -cx], [0, 1, -cy], [0, 0, 1]], dtype=np.float64)
    rotate = np.array([[cos, sin, 0], [-sin, cos, 0], [0, 0, 1]], dtype=np.float64)
    back = np.array([[1, 0, cx], [0, 1, cy], [0, 0, 1]], dtype=np.float64)
    return back @ rotate @ to_origin


def warp(x: Tensor, homography: np.ndarray, fill: float = 0.5) -> Tensor:
    """
    Варп изображения гомографией (координаты непрерывные, центр пикселя i — i+0.5).

    Для каждого выходного пикселя берётся прообраз H⁻¹·p и значение
    интерполируется билинейно; соседи вне кадра заменяются на fill.
    Дифференцируемо по x.

    Raises:
        ShapeError: гомография необратима.
    """
    if x.ndim != 4:
        raise ShapeError("warp ожидает (N, C, H, W)", {"shape": x.shape})
    homography = np.asarray(homography, dtype=np.float64)
    if abs(np.linalg.det(homography)) < 1e-12:
        raise ShapeError("Вырожденная гомография", {"det": float(np.linalg.det(homography))})
    if np.allclose(homography, np.eye(3), rtol=0.0, atol=1e-15):
        return make_result(x.data.copy(), (x,), lambda g: (g,))

    n, c, h, w = x.shape
    inverse = np.linalg.inv(homography)
    ys, xs = np.meshgrid(np.arange(h) + 0.5, np.arange(w) + 0.5, indexing="ij")
    points = np.stack([xs.ravel(), ys.ravel(), np.ones(h * w)])
    src = inverse @ points
    with np.errstate(divide="ignore", invalid="ignore"):
        src_x = src[0] / src[2] - 0.5
        src_y = src[1] / src[2] - 0.5
    bad = ~np.isfinite(src_x) | ~np.isfinite(src_y) | (src[2] <= 0)
    src_x = np.where(bad, -10.0, src_x)
    src_y = np.where(bad, -10.0, src_y)

    corners = _bilinear_corners(src_y, src_x, h, w)
    flat = x.data.reshape(n, c, h * w)
    value = np.zeros((n, c, h * w), dtype=x.dtype)
    for idx, weight, valid in corners:
        sampled = np.where(valid, flat[:, :, idx], fill)
        value += (weight * sampled).astype(x.dtype, copy=False)
    value = value.reshape(n, c, h, w)

    def backward(g: np.ndarray):
        g_flat = g.reshape(n, c, h * w)
        grad = np.zeros((n, c, h * w), dtype=x.dtype)
        for idx, weight, valid in corners:
            contrib = (g_flat * (weight * valid)).astype(x.dtype, copy=False)
            np.add.at(grad, (slice(None), slice(None), idx[valid]), contrib[:, :, valid])
        return (grad.reshape(n, c, h, w),)

    return make_result(value, (x,), backward)


def _bilinear_corners(
    src_y: np.ndarray, src_x: np.ndarray, h: int, w: int
) -> list[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Четыре соседа: (плоский индекс, вес, признак попадания в кадр)."""
    y0 = np.floor(src_y).astype(np.intp)
    x0 = np.floor(src_x).astype(np.intp)
    fy = src_y - y0
    fx = src_x - x0
    corners = []
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            yy = y0 + dy
            xx = x0 + dx
            valid = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
            idx = np.clip(yy, 0, h - 1) * w + np.clip(xx, 0, w - 1)
            corners.append((idx, wy * wx, valid))
    return corners


def output_size(shape: Tuple[int, int], factor: float) -> Tuple[int, int]:
    """Размер после масштабирования на factor (не меньше 1 пикселя)."""
    h, w = shape
    return max(1, int(round(h * factor))), max(1, int(round(w * factor)))
