"""
AdamW и расписание скорости обучения (линейный прогрев + косинус до нуля).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from core.exceptions import NumericError


def warmup_cosine_lr(step: int, base_lr: float, warmup_steps: int, total_steps: int) -> float:
    """
    lr на шаге step (0-based).

    Линейный рост до base_lr за warmup_steps, затем косинус до 0 к total_steps.
    """
    if base_lr == 0.0:
        return 0.0
    if warmup_steps > 0 and step < warmup_steps:
        return base_lr * (step + 1) / warmup_steps
    decay_steps = max(1, total_steps - warmup_steps)
    progress = min(1.0, max(0.0, (step - warmup_steps) / decay_steps))
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * progress))


@dataclass
class AdamW:
    """
    AdamW с развязанным weight decay.

    Состояние (моменты и счётчик) хранится по имени параметра, чтобы его
    можно было сохранить в чекпоинт и восстановить.
    """

    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    step_count: int = 0
    exp_avg: Dict[str, np.ndarray] = field(default_factory=dict)
    exp_avg_sq: Dict[str, np.ndarray] = field(default_factory=dict)

    def step(
        self,
        params: Dict[str, np.ndarray],
        grads: Mapping[str, np.ndarray],
        lr: float,
    ) -> None:
        """
        Обновить params на месте.

        Параметры без градиента не трогаются (и их моменты тоже).
        При lr == 0 параметры не меняются бит в бит.

        Raises:
            NumericError: нечисловой градиент.
        """
        self.step_count += 1
        beta1, beta2 = self.betas
        bias1 = 1.0 - beta1**self.step_count
        bias2 = 1.0 - beta2**self.step_count

        for name, grad in grads.items():
            if not np.all(np.isfinite(grad)):
                raise NumericError("Нечисловой градиент", {"param": name, "step": self.step_count})
            param = params[name]
            m = self.exp_avg.setdefault(name, np.zeros_like(param))
            v = self.exp_avg_sq.setdefault(name, np.zeros_like(param))
            m *= beta1
            m += (1.0 - beta1) * grad
            v *= beta2
            v += (1.0 - beta2) * grad * grad
            if lr == 0.0:
                continue
            if self.weight_decay:
                param *= 1.0 - lr * self.weight_decay
            denom = np.sqrt(v / bias2) + self.eps
            param -= (lr / bias1) * m / denom

    def state_arrays(self, prefix: str) -> Dict[str, np.ndarray]:
        """Моменты для чекпоинта: {prefix.m.name, prefix.v.name}."""
        arrays = {f"{prefix}.m.{k}": v for k, v in self.exp_avg.items()}
        arrays.update({f"{prefix}.v.{k}": v for k, v in self.exp_avg_sq.items()})
        return arrays

    def load_state_arrays(
        self, prefix: str, arrays: Mapping[str, np.ndarray], step_count: int
    ) -> None:
        self.step_count = step_count
        self.exp_avg = {
            k[len(prefix) + 3 :]: np.array(v)
            for k, v in arrays.items()
            if k.startswith(f"{prefix}.m.")
        }
        self.exp_avg_sq = {
            k[len(prefix) + 3 :]: np.array(v)
            for k, v in arrays.items()
            if k.startswith(f"{prefix}.v.")
        }
