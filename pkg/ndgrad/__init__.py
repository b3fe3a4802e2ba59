"""Минимальный дифференцируемый массив: ровно те операции, что нужны моделям, лоссам и атакам."""

from ndgrad.tensor import Graph, Tensor, as_tensor
from ndgrad import nn, ops, resample
from ndgrad.gradcheck import grad_check
from ndgrad.optim import AdamW, warmup_cosine_lr

__all__ = [
    "AdamW",
    "Graph",
    "Tensor",
    "as_tensor",
    "grad_check",
    "nn",
    "ops",
    "resample",
    "warmup_cosine_lr",
]
