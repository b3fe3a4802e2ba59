"""
Инициализация параметров и общие блоки сетей.

Параметры хранятся плоским словарём имя → массив ("down1.conv.weight"),
прямые проходы принимают словарь имя → Tensor.
"""

from __future__ import annotations

from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from ndgrad import Tensor, nn, ops

Params = Dict[str, np.ndarray]
TensorParams = Mapping[str, Tensor]


def _normal(rng: Optional[np.random.Generator], shape: Tuple[int, ...], std: float) -> np.ndarray:
    """rng=None: нужны только формы, вместо весов нулевой view без выделения памяти."""
    if rng is None:
        return np.broadcast_to(np.float64(0.0), shape)
    return rng.standard_normal(shape) * std


def init_conv(
    params: Params,
    name: str,
    c_in: int,
    c_out: int,
    kernel: int,
    rng: Optional[np.random.Generator],
    gain: float = 2.0,
) -> None:
    """He-нормальная инициализация свёртки; bias нулевой."""
    fan_in = c_in * kernel * kernel
    std = np.sqrt(gain / fan_in)
    params[f"{name}.weight"] = _normal(rng, (c_out, c_in, kernel, kernel), std)
    params[f"{name}.bias"] = np.zeros(c_out)


def init_norm(params: Params, name: str, channels: int) -> None:
    params[f"{name}.gamma"] = np.ones(channels)
    params[f"{name}.beta"] = np.zeros(channels)


def init_linear(
    params: Params,
    name: str,
    n_in: int,
    n_out: int,
    rng: Optional[np.random.Generator],
    gain: float = 1.0,
) -> None:
    params[f"{name}.weight"] = _normal(rng, (n_in, n_out), np.sqrt(gain / n_in))
    params[f"{name}.bias"] = np.zeros(n_out)


def conv(p: TensorParams, name: str, x: Tensor, stride: int = 1, padding="same") -> Tensor:
    return nn.conv2d(x, p[f"{name}.weight"], p[f"{name}.bias"], stride=stride, padding=padding)


def norm(p: TensorParams, name: str, x: Tensor, groups: int) -> Tensor:
    return nn.group_norm(x, p[f"{name}.gamma"], p[f"{name}.beta"], groups=groups)


def conv_norm_relu(
    p: TensorParams, name: str, x: Tensor, groups: int, stride: int = 1
) -> Tensor:
    """conv3×3 → GroupNorm → ReLU."""
    return ops.relu(norm(p, f"{name}.norm", conv(p, f"{name}.conv", x, stride=stride), groups))


def init_conv_norm(
    params: Params, name: str, c_in: int, c_out: int, rng: Optional[np.random.Generator]
) -> None:
    init_conv(params, f"{name}.conv", c_in, c_out, 3, rng)
    init_norm(params, f"{name}.norm", c_out)


def linear(p: TensorParams, name: str, x: Tensor) -> Tensor:
    return nn.linear(x, p[f"{name}.weight"], p[f"{name}.bias"])


def to_tensors(
    params: Mapping[str, np.ndarray],
    requires_grad: bool = False,
    dtype: np.dtype | type | None = None,
) -> Dict[str, Tensor]:
    """Обернуть массивы параметров в Tensor (без копирования при совпадении dtype)."""
    return {
        name: Tensor(
            value if dtype is None else value.astype(dtype, copy=False),
            requires_grad=requires_grad,
            name=name,
        )
        for name, value in params.items()
    }


def cast_params(params: Mapping[str, np.ndarray], dtype) -> Params:
    return {name: np.asarray(value, dtype=dtype).copy() for name, value in params.items()}
