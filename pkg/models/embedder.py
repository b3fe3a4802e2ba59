"""
Эмбеддер: U-Net, обусловленный сообщением.

Сообщение (±1) линейно проецируется в msg_embed_channels каналов и
размножается по пространству; проекция подаётся и на вход сети, и в
бутылочное горлышко. Апсемплинг — nearest ×2 + conv3×3. Выход — tanh,
т.е. водяной знак w ∈ [−1, 1].

Временной пулинг (только инференс): после d-го down-блока признаки
усредняются по группам из k кадров, в зеркальной позиции up-пути
повторяются обратно на кадры.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.layers import (
    Params,
    TensorParams,
    conv,
    conv_norm_relu,
    init_conv,
    init_conv_norm,
    init_linear,
    linear,
)
from ndgrad import Tensor, nn, ops
from schemas.model import ArchConfig


@dataclass(frozen=True)
class TemporalPooling:
    """Параметры временного пулинга: ядро/шаг k, глубина d, число кадров."""

    k: int
    d: int
    frames: int


def level_channels(arch: ArchConfig) -> list[int]:
    return [arch.base_channels * 2**i for i in range(arch.depth + 1)]


def init_embedder(arch: ArchConfig, rng: Optional[np.random.Generator]) -> Params:
    params: Params = {}
    ch = level_channels(arch)
    e = arch.msg_embed_channels

    init_linear(params, "msg_proj", arch.n_bits, e, rng)
    init_conv_norm(params, "stem", 3 + e, ch[0], rng)
    for i in range(1, arch.depth + 1):
        init_conv_norm(params, f"down{i}.a", ch[i - 1], ch[i], rng)
        init_conv_norm(params, f"down{i}.b", ch[i], ch[i], rng)
    init_conv_norm(params, "bottleneck", ch[-1] + e, ch[-1], rng)
    for i in range(arch.depth, 0, -1):
        init_conv_norm(params, f"up{i}.a", ch[i], ch[i - 1], rng)
        init_conv_norm(params, f"up{i}.b", 2 * ch[i - 1], ch[i - 1], rng)
    init_conv(params, "head", ch[0], 3, 1, rng, gain=1.0)
    return params


def message_embedding(p: TensorParams, message: Tensor) -> Tensor:
    """(B, n_bits) ∈ {0,1} → (B, E)."""
    return linear(p, "msg_proj", message * 2.0 - 1.0)


def _tile(embedding: Tensor, batch: int, size: int) -> Tensor:
    b, e = embedding.shape
    tiled = ops.reshape(embedding, (b, e, 1, 1))
    return ops.broadcast_to(tiled, (batch, e, size, size))


def embedder_forward(
    p: TensorParams,
    image: Tensor,
    message: Tensor,
    arch: ArchConfig,
    pooling: Optional[TemporalPooling] = None,
) -> Tensor:
    """
    w = Emb(x, m).

    Args:
        p: параметры эмбеддера.
        image: (B, 3, r, r) в [0, 1], r = model_res.
        message: (B, n_bits) или (1, n_bits) — одно сообщение на весь батч.
        arch: архитектура.
        pooling: временной пулинг (батч трактуется как последовательность кадров).

    Returns:
        (B, 3, r, r) в [−1, 1].
    """
    groups = arch.norm_groups
    batch = image.shape[0]
    embedding = message_embedding(p, message)

    stem_input = ops.concat([image * 2.0 - 1.0, _tile(embedding, batch, arch.model_res)])
    h = conv_norm_relu(p, "stem", stem_input, groups)

    def pool(t: Tensor) -> Tensor:
        return nn.temporal_avg_pool(t, pooling.k)

    def unpool(t: Tensor) -> Tensor:
        return nn.temporal_repeat(t, pooling.k, pooling.frames)

    if pooling is not None and pooling.d == 0:
        h = pool(h)
    skips = [h]
    for i in range(1, arch.depth + 1):
        h = conv_norm_relu(p, f"down{i}.a", h, groups, stride=2)
        h = conv_norm_relu(p, f"down{i}.b", h, groups)
        if pooling is not None and pooling.d == i:
            h = pool(h)
        skips.append(h)

    if embedding.shape[0] == 1:
        deep_embedding = embedding
    elif pooling is not None and pooling.d <= arch.depth:
        deep_embedding = nn.temporal_avg_pool(embedding, pooling.k)
    else:
        deep_embedding = embedding
    size = h.shape[2]
    h = conv_norm_relu(
        p, "bottleneck", ops.concat([h, _tile(deep_embedding, h.shape[0], size)]), groups
    )
    if pooling is not None and pooling.d == arch.depth:
        h = unpool(h)

    for i in range(arch.depth, 0, -1):
        h = nn.upsample_nearest(h, 2)
        h = conv_norm_relu(p, f"up{i}.a", h, groups)
        h = conv_norm_relu(p, f"up{i}.b", ops.concat([h, skips[i - 1]]), groups)
        if pooling is not None and pooling.d == i - 1:
            h = unpool(h)

    return ops.tanh(conv(p, "head", h, padding="valid"))
