"""
Проверка аналитических градиентов центральными конечными разностями.
"""

from __future__ import annotations

import logging
from typing import Callable, Sequence, Union

import numpy as np

from core.exceptions import NumericError
from ndgrad.tensor import Tensor


logger = logging.getLogger(__name__)

Point = Union[np.ndarray, Sequence[np.ndarray]]


def grad_check(
    op: Callable[..., Tensor],
    point: Point,
    step: float = 1e-5,
    seed: int = 0,
) -> float:
    """
    Максимальная относительная ошибка градиента операции в точке.

    Выход операции сворачивается в скаляр со случайными фиксированными
    весами, чтобы проверялся весь якобиан, а не только сумма строк.
    Ошибка по каждой частной производной:
    |analytic − numeric| / max(|analytic|, |numeric|, 1e−8).

    Args:
        op: функция от одного или нескольких Tensor.
        point: массив или список массивов — точка проверки (float64 для точных тестов).
        step: шаг конечных разностей.
        seed: сид для весов проекции.

    Returns:
        Максимум относительной ошибки по всем входам и элементам.

    Raises:
        NumericError: нечисловые значения в выходе или градиенте.
    """
    arrays = [np.array(point, copy=True)] if isinstance(point, np.ndarray) else [
        np.array(p, copy=True) for p in point
    ]

    inputs = [Tensor(a, requires_grad=True) for a in arrays]
    out = op(*inputs)
    _ensure_finite("выход", out.data)
    rng = np.random.default_rng(seed)
    projection = rng.standard_normal(out.shape).astype(out.dtype)

    def scalar(values: list[np.ndarray]) -> float:
        result = op(*[Tensor(v) for v in values]).data
        return float(np.sum(result * projection))

    out.backward(projection)
    worst = 0.0
    for index, tensor in enumerate(inputs):
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        _ensure_finite("градиент", analytic)
        numeric = np.zeros_like(analytic)
        flat = arrays[index].reshape(-1)
        for position in range(flat.size):
            original = flat[position]
            flat[position] = original + step
            plus = scalar(arrays)
            flat[position] = original - step
            minus = scalar(arrays)
            flat[position] = original
            numeric.reshape(-1)[position] = (plus - minus) / (2.0 * step)
        _ensure_finite("численный градиент", numeric)

        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
        error = float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0
        worst = max(worst, error)

    logger.debug(f"grad_check: max relative error = {worst:.3e}")
    return worst


def _ensure_finite(what: str, values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericError(f"grad_check: нечисловые значения ({what})", {"what": what})
