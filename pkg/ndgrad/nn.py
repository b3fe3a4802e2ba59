"""
Слои для свёрточных сетей: conv2d, group_norm, пулинги, апсемплинг, паддинг
и временной пулинг по оси кадров.

Раскладка изображений — (batch, channels, height, width).
"""

from __future__ import annotations

from typing import Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.exceptions import ShapeError
from ndgrad import ops
from ndgrad.tensor import Tensor, make_result

Padding = Union[str, int]


def _require_4d(name: str, x: Tensor) -> None:
    if x.ndim != 4:
        raise ShapeError(f"{name} ожидает тензор (N, C, H, W)", {"shape": x.shape})


def _resolve_padding(padding: Padding, kh: int, kw: int) -> Tuple[int, int]:
    if padding == "valid":
        return 0, 0
    if padding == "same":
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError("padding='same' только для нечётных ядер", {"kernel": (kh, kw)})
        return kh // 2, kw // 2
    if isinstance(padding, int) and padding >= 0:
        return padding, padding
    raise ShapeError("Неизвестный режим паддинга", {"padding": padding})


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: Padding = "same",
) -> Tensor:
    """
    Двумерная свёртка (кросс-корреляция, как в torch).

    Args:
        x: (N, C, H, W).
        weight: (O, C, kh, kw).
        bias: (O,) или None.
        stride: 1 или 2.
        padding: "same" (нечётные ядра), "valid" или целое число пикселей.

    Raises:
        ShapeError: несовпадение каналов, пустой выход, неверный паддинг.
    """
    _require_4d("conv2d", x)
    if stride not in (1, 2):
        raise ShapeError("Поддерживается stride 1 или 2", {"stride": stride})
    n, c, h, w = x.shape
    o, ci, kh, kw = weight.shape
    if c != ci:
        raise ShapeError(
            "conv2d: число каналов не совпадает",
            {"x": x.shape, "weight": weight.shape},
        )
    if bias is not None and bias.shape != (o,):
        raise ShapeError("conv2d: форма bias", {"bias": bias.shape, "out_channels": o})

    ph, pw = _resolve_padding(padding, kh, kw)
    h_out = (h + 2 * ph - kh) // stride + 1
    w_out = (w + 2 * pw - kw) // stride + 1
    if h_out < 1 or w_out < 1:
        raise ShapeError("conv2d: вход меньше ядра", {"x": x.shape, "kernel": (kh, kw)})

    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x.data
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    h_stop, w_stop = (h_out - 1) * stride + 1, (w_out - 1) * stride + 1
    windows = windows[:, :, :h_stop:stride, :w_stop:stride]

    # По одному примеру: результат не зависит от размера батча
    out = np.stack(
        [np.tensordot(windows[i], weight.data, axes=([0, 3, 4], [1, 2, 3])) for i in range(n)]
    ).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out, dtype=x.dtype)

    def backward(g: np.ndarray):
        grad_x = grad_w = grad_b = None
        if x.requires_grad:
            grad_xp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    contrib = np.tensordot(g, weight.data[:, :, i, j], axes=([1], [0]))
                    grad_xp[
                        :, :,
                        i : i + (h_out - 1) * stride + 1 : stride,
                        j : j + (w_out - 1) * stride + 1 : stride,
                    ] += contrib.transpose(0, 3, 1, 2)
            grad_x = grad_xp[:, :, ph : ph + h, pw : pw + w]
        if weight.requires_grad:
            grad_w = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
        if bias is not None and bias.requires_grad:
            grad_b = g.sum(axis=(0, 2, 3))
        return (grad_x, grad_w, grad_b) if bias is not None else (grad_x, grad_w)

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return make_result(out, parents, backward)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """x (N, in) @ weight (in, out) + bias (out,)."""
    out = ops.matmul(x, weight)
    return ops.add(out, bias) if bias is not None else out


def group_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    groups: int = 4,
    eps: float = 1e-5,
) -> Tensor:
    """Нормализация по группам каналов (статистики на каждый пример отдельно)."""
    _require_4d("group_norm", x)
    n, c, h, w = x.shape
    if c % groups != 0:
        raise ShapeError(
            "group_norm: каналы не делятся на группы",
            {"channels": c, "groups": groups},
        )

    xg = x.data.reshape(n, groups, -1)
    mu = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mu) * inv_std).reshape(n, c, h, w)
    out = xhat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]

    def backward(g: np.ndarray):
        grad_x = grad_gamma = grad_beta = None
        if x.requires_grad:
            gxhat = (g * gamma.data[None, :, None, None]).reshape(n, groups, -1)
            xh = xhat.reshape(n, groups, -1)
            grad_x = inv_std * (
                gxhat
                - gxhat.mean(axis=2, keepdims=True)
                - xh * (gxhat * xh).mean(axis=2, keepdims=True)
            )
            grad_x = grad_x.reshape(n, c, h, w)
        if gamma.requires_grad:
            grad_gamma = (g * xhat).sum(axis=(0, 2, 3))
        if beta.requires_grad:
            grad_beta = g.sum(axis=(0, 2, 3))
        return grad_x, grad_gamma, grad_beta

    return make_result(out.astype(x.dtype, copy=False), (x, gamma, beta), backward)


def avg_pool2d(x: Tensor, kernel: int) -> Tensor:
    """Непересекающееся усреднение окнами kernel×kernel (шаг = kernel)."""
    _require_4d("avg_pool2d", x)
    n, c, h, w = x.shape
    if kernel < 1 or h % kernel or w % kernel:
        raise ShapeError(
            "avg_pool2d: размер не делится на ядро",
            {"shape": x.shape, "kernel": kernel},
        )
    k = kernel
    value = x.data.reshape(n, c, h // k, k, w // k, k).mean(axis=(3, 5))

    def backward(g: np.ndarray):
        grad = np.repeat(np.repeat(g, k, axis=2), k, axis=3) / (k * k)
        return (grad.astype(x.dtype, copy=False),)

    return make_result(value, (x,), backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """(N, C, H, W) → (N, C)."""
    _require_4d("global_avg_pool", x)
    return ops.mean(x, axis=(2, 3))


def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    _require_4d("upsample_nearest", x)
    n, c, h, w = x.shape
    value = np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3)

    def backward(g: np.ndarray):
        return (g.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5)),)

    return make_result(value, (x,), backward)


def pad2d(x: Tensor, pad_h: int, pad_w: int, mode: str = "reflect", value: float = 0.0) -> Tensor:
    """
    Паддинг по H и W.

    mode: "reflect" (без повтора краевого пикселя, как numpy) или "constant".
    """
    _require_4d("pad2d", x)
    if mode == "constant":
        data = np.pad(
            x.data, ((0, 0), (0, 0), (pad_h, pad_h), (pad_w, pad_w)), constant_values=value
        )
        h, w = x.shape[2:]
        return make_result(data, (x,), lambda g: (g[:, :, pad_h : pad_h + h, pad_w : pad_w + w],))
    if mode != "reflect":
        raise ShapeError("Неизвестный режим паддинга", {"mode": mode})
    rows = np.pad(np.arange(x.shape[2]), pad_h, mode="reflect")
    cols = np.pad(np.arange(x.shape[3]), pad_w, mode="reflect")
    return ops.take(ops.take(x, rows, axis=2), cols, axis=3)


# --- временной пулинг -----------------------------------------------------


def _groups(frames: int, k: int) -> list[Tuple[int, int]]:
    return [(start, min(start + k, frames)) for start in range(0, frames, k)]


def temporal_avg_pool(x: Tensor, k: int) -> Tensor:
    """
    Среднее по группам из k соседних кадров вдоль оси 0 (ядро и шаг k).

    Последняя группа может быть короче; делим на её фактический размер.
    Среднее считается как x0 + mean(x − x0), поэтому одинаковые кадры
    дают в точности исходный кадр.
    """
    if k < 1:
        raise ShapeError("temporal_avg_pool: k ≥ 1", {"k": k})
    frames = x.shape[0]
    groups = _groups(frames, k)
    pooled = []
    for start, stop in groups:
        block = x.data[start:stop]
        first = block[0]
        pooled.append(first + (block - first).sum(axis=0) / (stop - start))
    value = np.stack(pooled).astype(x.dtype, copy=False)

    def backward(g: np.ndarray):
        grad = np.empty_like(x.data)
        for index, (start, stop) in enumerate(groups):
            grad[start:stop] = g[index] / (stop - start)
        return (grad,)

    return make_result(value, (x,), backward)


def temporal_repeat(x: Tensor, k: int, frames: int) -> Tensor:
    """Обратная к пулингу раскладка: каждая группа повторяется на свои кадры."""
    expected = len(_groups(frames, k))
    if x.shape[0] != expected:
        raise ShapeError(
            "temporal_repeat: число групп не совпадает",
            {"groups": x.shape[0], "expected": expected, "frames": frames, "k": k},
        )
    return ops.take(x, np.arange(frames) // k, axis=0)
