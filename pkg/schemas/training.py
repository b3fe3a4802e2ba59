"""
Pydantic-схемы конфигурации обучения и запуска.

RunConfig читается из JSON-файла (config.json) со строгим разбором:
неизвестные ключи отклоняются на любом уровне.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from schemas.model import ArchConfig


class TrainConfig(BaseModel):
    """
    Гиперпараметры обучения (масштаб «на столе»).

    Время t в расписании α — номер шага оптимизации.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    # Веса лоссов
    lambda_msg: float = Field(default=1.0, ge=0.0)
    lambda_adv: float = Field(default=0.1, ge=0.0)
    lambda_perc: float = Field(default=0.0, ge=0.0)

    # Бустинг водяного знака для дискриминатора
    beta: float = Field(default=1.0, ge=0.0)

    # Масштаб водяного знака и окно стадии 2
    alpha0: float = Field(default=1.0, gt=0.0)
    alpha1: float = Field(default=0.2, gt=0.0)
    n_start: int = Field(default=3000, ge=0)
    n_end: int = Field(default=4000, ge=1)

    # Диапазон разрешений при обучении
    s_min: int = Field(default=64, ge=8)
    s_max: int = Field(default=192, ge=8)

    # Оптимизатор
    lr: float = Field(default=5e-4, ge=0.0)
    warmup_steps: int = Field(default=200, ge=0)
    weight_decay: float = Field(default=0.01, ge=0.0)
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)

    # Бюджеты стадий; бюджет стадии 1 — n_start
    stage3_steps: int = Field(default=500, ge=0)
    batch_size: int = Field(default=8, ge=1)

    # Насыщение стадии 1
    saturation_threshold: float = Field(default=0.98, gt=0.0, le=1.0)
    saturation_window: int = Field(default=50, ge=1)
    # False — продолжать без насыщения (абляции с ожидаемым коллапсом)
    require_saturation: bool = True

    # Переключатели для абляций
    use_jnd: bool = True
    adv_from_start: bool = False
    use_attacks: bool = True

    checkpoint_every: int = Field(default=500, ge=1)
    log_every: int = Field(default=10, ge=1)
    precision: Literal["float32", "float64"] = "float32"

    @model_validator(mode="after")
    def check_ranges(self) -> "TrainConfig":
        """alpha0 ≥ alpha1 > 0; n_start < n_end; s_min ≤ s_max."""
        if self.alpha0 < self.alpha1:
            raise ValueError(f"alpha0={self.alpha0} должно быть ≥ alpha1={self.alpha1}")
        if self.n_start >= self.n_end:
            raise ValueError(f"n_start={self.n_start} должно быть < n_end={self.n_end}")
        if self.s_min > self.s_max:
            raise ValueError(f"s_min={self.s_min} должно быть ≤ s_max={self.s_max}")
        return self

    @property
    def anneal_steps(self) -> int:
        return self.n_end - self.n_start

    @property
    def total_steps(self) -> int:
        return self.n_end + self.stage3_steps


class DataConfig(BaseModel):
    """Источник изображений: директория или синтетический набор."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    path: Optional[Path] = None
    synthetic_images: int = Field(default=512, ge=0)
    synthetic_size: int = Field(default=128, ge=16)


class EvalConfig(BaseModel):
    """Параметры оценки."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    suite: Literal["image", "video", "identity", "combined"] = "image"
    tau: float = Field(default=4.0, ge=0.0)
    max_images: Optional[int] = Field(default=None, ge=1)


class RunConfig(BaseModel):
    """Полный конфиг запуска: 1:1 с ArchConfig + TrainConfig + данные + оценка + сид."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = 0
    arch: ArchConfig = Field(default_factory=ArchConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)


class TrainRecord(BaseModel):
    """Одна строка структурированного лога обучения."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["step", "stage", "summary"] = "step"
    step: int
    stage: int
    alpha: float
    lr: float = 0.0
    bit_acc: Optional[float] = None
    loss_total: Optional[float] = None
    loss_msg: Optional[float] = None
    loss_adv: Optional[float] = None
    loss_perc: Optional[float] = None
    loss_disc: Optional[float] = None
    n_start: Optional[int] = None
    n_end: Optional[int] = None
    status: Optional[str] = None
