"""
Pydantic-схемы атак и наборов атак.
"""

from __future__ import annotations

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class AttackKind(str, Enum):
    IDENTITY = "identity"
    BRIGHTNESS = "brightness"
    CONTRAST = "contrast"
    SATURATION = "saturation"
    HUE = "hue"
    GRAYSCALE = "grayscale"
    GAUSSIAN_BLUR = "gaussian_blur"
    HORIZONTAL_FLIP = "horizontal_flip"
    ROTATE = "rotate"
    CROP = "crop"
    PERSPECTIVE = "perspective"
    RESIZE = "resize"
    JPEG_LIKE = "jpeg_like"
    COMBINED = "combined"
    # Внешний видеокодек (H.264/H.265) через хук; без кодека — пропуск
    EXTERNAL_CODEC = "external_codec"


class AttackMode(str, Enum):
    TRAIN_RANDOM = "train_random"
    EVAL_DETERMINISTIC = "eval_deterministic"


class AttackCategory(str, Enum):
    IDENTITY = "identity"
    VALUEMETRIC = "valuemetric"
    COMPRESSION = "compression"
    GEOMETRIC = "geometric"
    COMBINED = "combined"


VALUEMETRIC_KINDS = {
    AttackKind.BRIGHTNESS,
    AttackKind.CONTRAST,
    AttackKind.SATURATION,
    AttackKind.HUE,
    AttackKind.GRAYSCALE,
    AttackKind.GAUSSIAN_BLUR,
}
GEOMETRIC_KINDS = {
    AttackKind.HORIZONTAL_FLIP,
    AttackKind.ROTATE,
    AttackKind.CROP,
    AttackKind.PERSPECTIVE,
    AttackKind.RESIZE,
}


class AttackSpec(BaseModel):
    """
    Описание одной трансформации.

    strength — основной параметр атаки (коэффициент, угол, доля стороны,
    качество JPEG, размер ядра, CRF); для train_random — нижняя граница
    диапазона, strength_max — верхняя.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: AttackKind
    strength: Optional[float] = None
    strength_max: Optional[float] = None
    mode: AttackMode = AttackMode.EVAL_DETERMINISTIC
    children: List["AttackSpec"] = Field(default_factory=list)
    codec: Optional[str] = None

    @model_validator(mode="after")
    def check_strength(self) -> "AttackSpec":
        kind, s = self.kind, self.strength
        needs_strength = kind not in (
            AttackKind.IDENTITY,
            AttackKind.GRAYSCALE,
            AttackKind.HORIZONTAL_FLIP,
            AttackKind.COMBINED,
        )
        if needs_strength and s is None:
            raise ValueError(f"Атака {kind.value} требует strength")
        values = [v for v in (s, self.strength_max) if v is not None]
        if kind == AttackKind.CROP and any(not 0.0 < v <= 1.0 for v in values):
            raise ValueError(f"Доля стороны crop должна быть в (0, 1], получено {values}")
        if kind == AttackKind.JPEG_LIKE and any(not 1 <= v <= 100 for v in values):
            raise ValueError(f"Качество JPEG должно быть в [1, 100], получено {values}")
        if kind == AttackKind.GAUSSIAN_BLUR and self.mode == AttackMode.EVAL_DETERMINISTIC:
            if s is None or s < 1 or int(s) != s or int(s) % 2 == 0:
                raise ValueError(f"Ядро размытия должно быть нечётным целым, получено {s}")
        if kind in (
            AttackKind.BRIGHTNESS,
            AttackKind.CONTRAST,
            AttackKind.SATURATION,
            AttackKind.RESIZE,
        ):
            if any(v < 0 for v in values) or (
                kind == AttackKind.RESIZE and any(v <= 0 for v in values)
            ):
                raise ValueError(f"Недопустимый коэффициент {kind.value}: {values}")
        if kind == AttackKind.PERSPECTIVE and any(not 0.0 <= v < 1.0 for v in values):
            raise ValueError(f"Масштаб перспективы должен быть в [0, 1), получено {values}")
        if kind == AttackKind.COMBINED and not self.children:
            raise ValueError("combined требует непустой список children")
        if kind == AttackKind.EXTERNAL_CODEC and not self.codec:
            raise ValueError("external_codec требует имя кодека")
        if self.mode == AttackMode.TRAIN_RANDOM and self.strength_max is not None and s is not None:
            if self.strength_max < s:
                raise ValueError(f"strength_max < strength для {kind.value}")
        return self

    @property
    def attack_id(self) -> str:
        """Стабильный идентификатор для отчётов: jpeg_like_40, combined(...)."""
        if self.kind == AttackKind.COMBINED:
            return "combined(" + "+".join(child.attack_id for child in self.children) + ")"
        if self.kind == AttackKind.EXTERNAL_CODEC:
            return f"{self.codec}_{_fmt(self.strength)}"
        if self.strength is None:
            return self.kind.value
        return f"{self.kind.value}_{_fmt(self.strength)}"

    @property
    def is_external(self) -> bool:
        return self.kind == AttackKind.EXTERNAL_CODEC or any(c.is_external for c in self.children)


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    return str(int(value)) if float(value).is_integer() else f"{value:g}"


class AttackSuite(BaseModel):
    """Набор атак одной категории (колонка итоговой таблицы)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    category: AttackCategory
    specs: List[AttackSpec]
