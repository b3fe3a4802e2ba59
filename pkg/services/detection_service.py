"""
Детекция водяного знака: бинаризация, расстояние Хэмминга и точный
p-value биномиального хвоста.

p = Σ_{k ≤ d} C(n, k) / 2^n — вероятность получить не больше d
несовпадений для случайного равномерного сообщения. Для n ≤ 64 считаем
в рациональных числах, для больших n — в лог-пространстве.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from config.constants import BIT_THRESHOLD, DEFAULT_TAU
from core.exceptions import ValidationError
from schemas.model import BitMessage
from schemas.report import DetectionReport


logger = logging.getLogger(__name__)

EXACT_MAX_BITS = 64
_LN10 = math.log(10.0)


def threshold(soft_message: Sequence[float] | np.ndarray) -> BitMessage:
    """bit = 1 ⇔ значение ≥ 0.5 (ничья → 1)."""
    values = np.asarray(soft_message, dtype=np.float64).reshape(-1)
    return BitMessage.from_array((values >= BIT_THRESHOLD).astype(np.int64))


def hamming(a: BitMessage, b: BitMessage) -> int:
    if a.n_bits != b.n_bits:
        raise ValidationError("Длины сообщений не совпадают", {"a": a.n_bits, "b": b.n_bits})
    return sum(x != y for x, y in zip(a.bits, b.bits))


def _check_range(n_bits: int, distance: int) -> None:
    if n_bits < 1:
        raise ValidationError("n_bits должно быть ≥ 1", {"n_bits": n_bits})
    if not 0 <= distance <= n_bits:
        raise ValidationError(
            "Расстояние Хэмминга вне [0, n_bits]",
            {"n_bits": n_bits, "hamming": distance},
        )


def p_value_exact(n_bits: int, distance: int) -> Fraction:
    """Точное значение хвоста в рациональных числах."""
    _check_range(n_bits, distance)
    return Fraction(sum(math.comb(n_bits, k) for k in range(distance + 1)), 2**n_bits)


@lru_cache(maxsize=64)
def _log_pmf(n_bits: int) -> np.ndarray:
    """log P(hamming = k) для k = 0..n (кеш только на чтение)."""
    k = np.arange(n_bits + 1, dtype=np.float64)
    values = (
        gammaln(n_bits + 1.0)
        - gammaln(k + 1.0)
        - gammaln(n_bits - k + 1.0)
        - n_bits * math.log(2.0)
    )
    values.setflags(write=False)
    return values


def log_p_value(n_bits: int, distance: int) -> float:
    """Натуральный логарифм p-value; d = n → ровно 0."""
    _check_range(n_bits, distance)
    if distance == n_bits:
        return 0.0
    if n_bits <= EXACT_MAX_BITS:
        p = p_value_exact(n_bits, distance)
        return math.log(p.numerator) - math.log(p.denominator)
    return min(0.0, float(logsumexp(_log_pmf(n_bits)[: distance + 1])))


def p_value(n_bits: int, distance: int) -> float:
    """
    P(Hamming ≤ d) при равномерном случайном сообщении.

    Raises:
        ValidationError: d вне [0, n].
    """
    _check_range(n_bits, distance)
    if n_bits <= EXACT_MAX_BITS:
        return float(p_value_exact(n_bits, distance))
    return math.exp(log_p_value(n_bits, distance))


def neg_log10_p(n_bits: int, distance: int) -> float:
    """−log10 p; конечно для всех d, при d = n ровно 0."""
    return max(0.0, -log_p_value(n_bits, distance) / _LN10)


def detect(
    soft_message: Sequence[float] | np.ndarray,
    reference: BitMessage,
    tau: float = DEFAULT_TAU,
) -> DetectionReport:
    """
    Решение «водяной знак есть» ⇔ −log10 p ≥ τ.

    Raises:
        ValidationError: длины не совпадают.
    """
    extracted = threshold(soft_message)
    distance = hamming(extracted, reference)
    n = reference.n_bits
    score = neg_log10_p(n, distance)
    return DetectionReport(
        extracted_bits=extracted,
        hamming=distance,
        bit_accuracy=1.0 - distance / n,
        p_value=max(p_value(n, distance), np.finfo(np.float64).tiny),
        neg_log10_p=score,
        detected=score >= tau,
        tau=tau,
    )


@dataclass(frozen=True)
class NullCheckResult:
    """Эмпирическая доля ложных срабатываний на чистых изображениях."""

    n_trials: int
    false_positives: int
    tau: float

    @property
    def empirical_fpr(self) -> float:
        return self.false_positives / self.n_trials if self.n_trials else 0.0

    @property
    def bound(self) -> float:
        """Теоретическая граница 10^−τ."""
        return 10.0 ** (-self.tau)


def null_check(
    soft_messages: np.ndarray,
    trials_per_image: int,
    rng: np.random.Generator,
    tau: float = DEFAULT_TAU,
) -> NullCheckResult:
    """
    Проверка нулевой модели Монте-Карло: мягкие сообщения, извлечённые из
    изображений без водяного знака, сравниваются со случайными эталонами.

    Args:
        soft_messages: (N, n_bits) — выход экстрактора на чистых изображениях.
        trials_per_image: число случайных эталонов на изображение.
    """
    soft = np.atleast_2d(np.asarray(soft_messages, dtype=np.float64))
    n_bits = soft.shape[1]
    positives = 0
    trials = 0
    for row in soft:
        extracted = (row >= BIT_THRESHOLD).astype(np.int64)
        references = rng.integers(0, 2, size=(trials_per_image, n_bits))
        distances = np.count_nonzero(references != extracted, axis=1)
        positives += sum(neg_log10_p(n_bits, int(d)) >= tau for d in distances)
        trials += trials_per_image
    result = NullCheckResult(n_trials=trials, false_positives=int(positives), tau=tau)
    logger.info(
        f"Null-check: {result.false_positives}/{result.n_trials} срабатываний "
        f"(FPR {result.empirical_fpr:.2e}, граница {result.bound:.0e})"
    )
    return result
