"""
Экстрактор: свёрточный энкодер → глобальный пулинг → линейная голова.

Выход — логиты по битам; мягкое сообщение m̃ = sigmoid(логиты).
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from models.layers import Params, TensorParams, conv_norm_relu, init_conv_norm, init_linear, linear
from ndgrad import Tensor, nn, ops
from schemas.model import ArchConfig


def init_extractor(arch: ArchConfig, rng: Optional[np.random.Generator]) -> Params:
    params: Params = {}
    c = arch.base_channels
    init_conv_norm(params, "stem", 3, c, rng)
    for i in range(1, arch.depth + 1):
        init_conv_norm(params, f"stage{i}.a", c * 2 ** (i - 1), c * 2**i, rng)
        init_conv_norm(params, f"stage{i}.b", c * 2**i, c * 2**i, rng)
    init_linear(params, "head", c * 2**arch.depth, arch.n_bits, rng)
    return params


def extractor_logits(p: TensorParams, image: Tensor, arch: ArchConfig) -> Tensor:
    """(B, 3, r, r) → (B, n_bits) логитов."""
    groups = arch.norm_groups
    h = conv_norm_relu(p, "stem", image * 2.0 - 1.0, groups)
    for i in range(1, arch.depth + 1):
        h = conv_norm_relu(p, f"stage{i}.a", h, groups, stride=2)
        h = conv_norm_relu(p, f"stage{i}.b", h, groups)
    return linear(p, "head", nn.global_avg_pool(h))


def extractor_forward(p: TensorParams, image: Tensor, arch: ArchConfig) -> Tensor:
    return ops.sigmoid(extractor_logits(p, image, arch))
