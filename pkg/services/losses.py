"""
Функции потерь и расписание масштаба водяного знака.

Все лоссы возвращают скалярный Tensor, чтобы по ним можно было сделать backward.
"""

from __future__ import annotations

import math

import numpy as np

from config.constants import BCE_EPS
from core.exceptions import ShapeError
from ndgrad import Tensor, ops
from schemas.training import TrainConfig


def message_loss(soft: Tensor, target: np.ndarray | Tensor) -> Tensor:
    """
    Средний BCE по битам; мягкое сообщение зажимается в [ε, 1 − ε].

    Raises:
        ShapeError: формы не совпадают.
    """
    target_shape = target.shape if isinstance(target, Tensor) else np.shape(target)
    if soft.shape != tuple(target_shape):
        raise ShapeError(
            "message_loss: длины сообщений различаются",
            {"soft": soft.shape, "target": target_shape},
        )
    t = target if isinstance(target, Tensor) else Tensor(np.asarray(target, dtype=soft.dtype))
    s = ops.clamp(soft, BCE_EPS, 1.0 - BCE_EPS)
    per_bit = t * ops.log(s) + (1.0 - t) * ops.log(1.0 - s)
    return -ops.mean(per_bit)


def boost(x: Tensor, x_w: Tensor, beta: float) -> Tensor:
    """
    x̂_w = clamp(x + β·(x_w − x), 0, 1): усиленный остаток для дискриминатора.

    При β = 1 возвращается x_w как есть, при β = 0 — x.
    """
    if x.shape != x_w.shape:
        raise ShapeError("boost: формы различаются", {"x": x.shape, "x_w": x_w.shape})
    if beta == 1.0:
        return x_w
    if beta == 0.0:
        return x
    return ops.clamp(x + (x_w - x) * beta, 0.0, 1.0)


def discriminator_step_loss(real_logits: Tensor, fake_logits: Tensor) -> Tensor:
    """Dual-hinge: mean(½·[ReLU(1 − D(x)) + ReLU(1 + D(x̂_w))])."""
    if real_logits.shape != fake_logits.shape:
        raise ShapeError(
            "discriminator_step_loss: формы карт различаются",
            {"real": real_logits.shape, "fake": fake_logits.shape},
        )
    hinge = ops.relu(1.0 - real_logits) + ops.relu(fake_logits + 1.0)
    return ops.mean(hinge) * 0.5


def embedder_adv_loss(fake_logits: Tensor, lambda_adv: float = 1.0) -> Tensor:
    """−λ_adv·mean(D(x̂_w)); дискриминатор в этом члене заморожен вызывающим кодом."""
    return ops.mean(fake_logits) * (-lambda_adv)


def perceptual_mse(x: Tensor, x_w: Tensor) -> Tensor:
    """MSE между оригиналом и изображением с водяным знаком (только абляции)."""
    return ops.mean(ops.square(x_w - x))


def alpha_schedule(t: float, config: TrainConfig) -> float:
    """
    α(t) = α₁ + (α₀ − α₁)·cos(π/2·φ), φ = clip((t − N_start)/(N_end − N_start), 0, 1).
    """
    if t <= config.n_start:
        return config.alpha0
    if t >= config.n_end:
        return config.alpha1
    phi = (t - config.n_start) / (config.n_end - config.n_start)
    return config.alpha1 + (config.alpha0 - config.alpha1) * math.cos(0.5 * math.pi * phi)
