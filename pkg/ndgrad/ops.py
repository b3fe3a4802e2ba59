"""
Поэлементные операции, редукции и операции над формой.

Бинарные операции поддерживают numpy-бродкастинг; градиент сворачивается
обратно к форме входа (_unbroadcast).
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import ShapeError
from ndgrad.tensor import Tensor, TensorLike, as_tensor, make_result


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Просуммировать градиент по осям, размноженным бродкастингом."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(
            f"Несовместимые формы в {op}", {"a": a.shape, "b": b.shape}
        ) from exc


# --- бинарные --------------------------------------------------------------


def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast("add", a, b)

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(a.data + b.data, (a, b), backward)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = _pair(a, b)
    _check_broadcast("sub", a, b)

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(a.data - b.data, (a, b), backward)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    # Скаляр остаётся python-числом: dtype тензора не меняется
    if isinstance(a, Tensor) and np.isscalar(b):
        scalar = float(b)
        return make_result(a.data * scalar, (a,), lambda g: (g * scalar,))
    if isinstance(b, Tensor) and np.isscalar(a):
        return mul(b, a)

    a, b = _pair(a, b)
    _check_broadcast("mul", a, b)

    def backward(g: np.ndarray):
        grad_a = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        grad_b = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return grad_a, grad_b

    return make_result(a.data * b.data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Матричное произведение двумерных тензоров: (n, k) @ (k, m)."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul ожидает (n, k) @ (k, m)", {"a": a.shape, "b": b.shape})

    def backward(g: np.ndarray):
        grad_a = g @ b.data.T if a.requires_grad else None
        grad_b = a.data.T @ g if b.requires_grad else None
        return grad_a, grad_b

    return make_result(a.data @ b.data, (a, b), backward)


def _pair(a: TensorLike, b: TensorLike) -> Tuple[Tensor, Tensor]:
    like = a if isinstance(a, Tensor) else b if isinstance(b, Tensor) else None
    return as_tensor(a, like), as_tensor(b, like)


# --- унарные ---------------------------------------------------------------


def _unary(x: Tensor, value: np.ndarray, local_grad: Callable[[], np.ndarray]) -> Tensor:
    return make_result(value, (x,), lambda g: (g * local_grad(),))


def relu(x: Tensor) -> Tensor:
    """max(x, 0); субградиент в нуле равен 0."""
    mask = x.data > 0
    return make_result(np.where(mask, x.data, 0.0).astype(x.dtype), (x,), lambda g: (g * mask,))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    mask = x.data > 0
    scale = np.where(mask, 1.0, slope).astype(x.dtype)
    return make_result(x.data * scale, (x,), lambda g: (g * scale,))


def sigmoid(x: Tensor) -> Tensor:
    # 0.5·(1 + tanh(x/2)) устойчиво на обоих хвостах и даёт ровно 0.5 в нуле
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _unary(x, y, lambda: y * (1.0 - y))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _unary(x, y, lambda: 1.0 - y * y)


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise ShapeError("log от неположительного значения", {"min": float(x.data.min())})
    return _unary(x, np.log(x.data), lambda: 1.0 / x.data)


def square(x: Tensor) -> Tensor:
    return _unary(x, x.data * x.data, lambda: 2.0 * x.data)


def clamp(x: Tensor, low: Optional[float] = None, high: Optional[float] = None) -> Tensor:
    """
    Обрезать значения к [low, high].

    Градиент проходит как есть строго внутри границ и равен 0 на границе и вне её.
    """
    lo = -np.inf if low is None else low
    hi = np.inf if high is None else high
    mask = (x.data > lo) & (x.data < hi)
    return make_result(np.clip(x.data, lo, hi), (x,), lambda g: (g * mask,))


# --- редукции --------------------------------------------------------------


def _normalize_axis(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    axes = _normalize_axis(axis, x.ndim)
    value = np.sum(x.data, axis=axes, keepdims=keepdims)

    def backward(g: np.ndarray):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_result(np.asarray(value, dtype=x.dtype), (x,), backward)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axis(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return mul(sum(x, axis=axes, keepdims=keepdims), 1.0 / count)


# --- форма -----------------------------------------------------------------


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        value = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(
            "reshape в несовместимую форму",
            {"from": x.shape, "to": tuple(shape)},
        ) from exc
    return make_result(value, (x,), lambda g: (g.reshape(x.shape),))


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        value = np.broadcast_to(x.data, tuple(shape)).copy()
    except ValueError as exc:
        raise ShapeError(
            "broadcast_to в несовместимую форму",
            {"from": x.shape, "to": tuple(shape)},
        ) from exc
    return make_result(value, (x,), lambda g: (_unbroadcast(g, x.shape),))


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Склейка по оси (по умолчанию — по каналам)."""
    if not tensors:
        raise ShapeError("concat от пустого списка")
    ref = tensors[0].shape
    axis = axis % len(ref)
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(
            t.shape[i] != ref[i] for i in range(len(ref)) if i != axis
        ):
            raise ShapeError(
                "concat: формы различаются вне оси склейки",
                {"a": ref, "b": t.shape, "axis": axis},
            )

    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g: np.ndarray):
        index = [slice(None)] * g.ndim
        grads = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            index[axis] = slice(int(lo), int(hi))
            grads.append(g[tuple(index)])
        return tuple(grads)

    return make_result(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def getitem(x: Tensor, index) -> Tensor:
    """Базовая индексация (срезы/целые); градиент раскладывается обратно нулями."""
    value = x.data[index]

    def backward(g: np.ndarray):
        grad = np.zeros_like(x.data)
        if _is_advanced(index):
            np.add.at(grad, index, g)
        else:
            grad[index] = g
        return (grad,)

    return make_result(np.array(value, copy=True), (x,), backward)


def _is_advanced(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def take(x: Tensor, indices: np.ndarray, axis: int) -> Tensor:
    """
    Выборка по индексам вдоль оси (повторы допустимы).

    Основа для отражения, переворота и поворота на 90°: прямой проход
    копирует значения точно, обратный суммирует вклады.
    """
    indices = np.asarray(indices, dtype=np.intp)
    axis = axis % x.ndim

    def backward(g: np.ndarray):
        grad = np.zeros_like(x.data)
        moved_grad = np.moveaxis(grad, axis, 0)
        np.add.at(moved_grad, indices, np.moveaxis(g, axis, 0))
        return (grad,)

    return make_result(np.take(x.data, indices, axis=axis), (x,), backward)


def straight_through(transform: Callable[[np.ndarray], np.ndarray], x: Tensor) -> Tensor:
    """
    Прямой проход — transform(x), обратный — тождественный якобиан.

    Raises:
        ShapeError: transform меняет форму.
    """
    value = np.asarray(transform(x.data))
    if value.shape != x.shape:
        raise ShapeError(
            "straight_through не допускает преобразований, меняющих форму",
            {"input": x.shape, "output": value.shape},
        )
    return make_result(value.astype(x.dtype, copy=False), (x,), lambda g: (g,))
