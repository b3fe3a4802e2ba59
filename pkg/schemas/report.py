"""
Pydantic-схемы результатов: детекция, отчёт об оценке, строки абляций.
"""

from __future__ import annotations

from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.constants import REPORT_SCHEMA_VERSION
from schemas.model import BitMessage


class DetectionReport(BaseModel):
    """Результат проверки одного изображения на наличие водяного знака."""

    model_config = ConfigDict(frozen=True)

    extracted_bits: BitMessage
    hamming: int = Field(ge=0)
    bit_accuracy: float = Field(ge=0.0, le=1.0)
    p_value: float = Field(gt=0.0, le=1.0)
    neg_log10_p: float = Field(ge=0.0)
    detected: bool
    tau: float

    @model_validator(mode="after")
    def check_consistency(self) -> "DetectionReport":
        n = self.extracted_bits.n_bits
        if self.hamming > n:
            raise ValueError(f"hamming={self.hamming} больше длины сообщения {n}")
        if abs(self.bit_accuracy - (1.0 - self.hamming / n)) > 1e-12:
            raise ValueError("bit_accuracy не согласована с hamming")
        return self


class AttackRow(BaseModel):
    """Строка отчёта: одна атака, средние по изображениям."""

    attack_id: str
    category: str
    bit_accuracy: Optional[float] = None
    neg_log10_p: Optional[float] = None
    detected_rate: Optional[float] = None
    n_images: int = 0
    skipped: bool = False
    skip_reason: Optional[str] = None


class QualityBlock(BaseModel):
    # inf (изображения совпали) в JSON записывается как null
    psnr: Optional[float]
    ssim: float
    n_images: int


class RunMetadata(BaseModel):
    model_hash: str
    seed: int
    suite_id: str
    tau: float
    alpha: float
    message_hex: Optional[str] = None
    temporal_k: Optional[int] = None
    temporal_d: Optional[int] = None


class EvalReport(BaseModel):
    """
    Отчёт об оценке устойчивости и незаметности.

    category_aggregates — среднее по атакам категории (пропущенные не учитываются).
    """

    schema_version: str = REPORT_SCHEMA_VERSION
    rows: List[AttackRow]
    category_aggregates: Dict[str, Optional[float]]
    category_neg_log10_p: Dict[str, Optional[float]] = Field(default_factory=dict)
    quality: Optional[QualityBlock] = None
    metadata: RunMetadata
    speedup: Optional[float] = None


class AblationRow(BaseModel):
    """Строка таблицы абляций."""

    kind: str
    variant: str
    seed: int
    identity: Optional[float] = None
    valuemetric: Optional[float] = None
    compression: Optional[float] = None
    geometric: Optional[float] = None
    combined: Optional[float] = None
    psnr: Optional[float] = None
    collapsed: bool = False
    status: str = "ok"
