"""
Патч-дискриминатор: четыре свёртки 4×4 с шагом 2 и паддингом 1.

Выход (B, 1, ⌊H/16⌋, ⌊W/16⌋) — по логиту на патч. Нормализация на всех
слоях, кроме первого и последнего; активация leaky ReLU(0.2).
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from core.exceptions import ShapeError
from models.layers import Params, TensorParams, conv, init_conv, init_norm, norm
from ndgrad import Tensor, ops
from schemas.model import ArchConfig

KERNEL = 4
STRIDE = 2
N_LAYERS = 4
TOTAL_STRIDE = STRIDE**N_LAYERS


def receptive_field() -> int:
    """Рецептивное поле выходного логита, пикселей."""
    field, jump = 1, 1
    for _ in range(N_LAYERS):
        field += (KERNEL - 1) * jump
        jump *= STRIDE
    return field


def _channels(arch: ArchConfig) -> list[int]:
    c = arch.base_channels
    return [3, c, 2 * c, 4 * c, 1]


def init_discriminator(arch: ArchConfig, rng: Optional[np.random.Generator]) -> Params:
    params: Params = {}
    ch = _channels(arch)
    for i in range(N_LAYERS):
        init_conv(params, f"d{i + 1}.conv", ch[i], ch[i + 1], KERNEL, rng)
        if 0 < i < N_LAYERS - 1:
            init_norm(params, f"d{i + 1}.norm", ch[i + 1])
    return params


def discriminator_forward(p: TensorParams, image: Tensor, arch: ArchConfig) -> Tensor:
    """
    Логиты «реальности» по патчам.

    Raises:
        ShapeError: изображение меньше рецептивного поля.
    """
    field = receptive_field()
    if min(image.shape[2:]) < field:
        raise ShapeError(
            "Изображение меньше рецептивного поля дискриминатора",
            {"shape": image.shape, "receptive_field": field},
        )
    h = image * 2.0 - 1.0
    for i in range(N_LAYERS):
        name = f"d{i + 1}"
        h = conv(p, f"{name}.conv", h, stride=STRIDE, padding=1)
        if i == N_LAYERS - 1:
            break
        if i > 0:
            h = norm(p, f"{name}.norm", h, arch.norm_groups)
        h = ops.leaky_relu(h, 0.2)
    return h
