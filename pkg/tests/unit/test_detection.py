"""
Unit-тесты статистики детекции: p-value, −log10 p, решение и null-check.
"""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from core.exceptions import ValidationError
from schemas.model import BitMessage
from services.detection_service import (
    detect,
    hamming,
    neg_log10_p,
    null_check,
    p_value,
    p_value_exact,
    threshold,
)


class TestPValue:
    """Точный биномиальный хвост."""

    @pytest.mark.parametrize("n", range(1, 13))
    def test_matches_exhaustive_enumeration(self, n: int) -> None:
        """Тест: p(n, d) совпадает с полным перебором 2^n сообщений."""
        reference = (0,) * n
        counts = [0] * (n + 1)
        for candidate in itertools.product((0, 1), repeat=n):
            counts[sum(a != b for a, b in zip(candidate, reference))] += 1

        for d in range(n + 1):
            assert p_value_exact(n, d) == Fraction(sum(counts[: d + 1]), 2**n)

    def test_known_values_for_sixteen_bits(self) -> None:
        assert p_value_exact(16, 0) == Fraction(1, 65536)
        assert p_value_exact(16, 8) == Fraction(39203, 65536)
        assert p_value(16, 8) == pytest.approx(0.598190, abs=1e-6)

    def test_full_distance_is_one(self) -> None:
        assert p_value(16, 16) == 1.0
        assert neg_log10_p(16, 16) == 0.0
        assert neg_log10_p(256, 256) == 0.0

    @pytest.mark.parametrize("n", [16, 64, 65, 256])
    def test_monotone_in_distance(self, n: int) -> None:
        values = [p_value(n, d) for d in range(n + 1)]

        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_out_of_range_distance_raises(self) -> None:
        with pytest.raises(ValidationError):
            p_value(16, 17)
        with pytest.raises(ValidationError):
            p_value(16, -1)


class TestNegLog10P:
    @pytest.mark.parametrize(
        "n,d,expected,tol",
        [
            (16, 0, 4.8165, 1e-4),
            (16, 8, 0.2232, 1e-4),
            (256, 0, 77.0637, 1e-3),
            (256, 128, 0.28, 0.01),
        ],
    )
    def test_known_values(self, n: int, d: int, expected: float, tol: float) -> None:
        assert neg_log10_p(n, d) == pytest.approx(expected, abs=tol)

    def test_large_n_finite_everywhere(self) -> None:
        values = [neg_log10_p(256, d) for d in range(257)]

        assert all(math.isfinite(v) and v >= 0.0 for v in values)
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_log_space_agrees_with_exact_at_boundary(self) -> None:
        """Тест: для n = 65 лог-суммирование совпадает с рациональным счётом."""
        for d in (0, 10, 32, 50):
            exact = -math.log10(float(p_value_exact(65, d)))
            assert neg_log10_p(65, d) == pytest.approx(exact, rel=1e-9)


class TestDetect:
    def test_threshold_tie_goes_to_one(self) -> None:
        assert threshold([0.5, 0.4999, 0.9]).bits == (1, 0, 1)

    def test_hamming_length_mismatch(self) -> None:
        with pytest.raises(ValidationError):
            hamming(BitMessage.from_hex("a", 4), BitMessage.from_hex("aa", 8))

    def test_perfect_extraction_256_bits(self) -> None:
        reference = BitMessage.random(256, np.random.default_rng(0))
        report = detect(reference.to_array(), reference, tau=10.0)

        assert report.detected
        assert report.hamming == 0
        assert report.bit_accuracy == 1.0
        assert report.neg_log10_p == pytest.approx(77.06, abs=0.01)
        assert report.p_value > 0.0

    def test_inverted_message_not_detected(self) -> None:
        reference = BitMessage.from_hex("a5a5", 16)
        report = detect(1.0 - reference.to_array(), reference, tau=4.0)

        assert not report.detected
        assert report.hamming == 16
        assert report.neg_log10_p == 0.0

    def test_decision_is_inclusive_at_tau(self) -> None:
        reference = BitMessage.from_hex("00", 8)
        score = neg_log10_p(8, 0)

        assert detect(np.zeros(8), reference, tau=score).detected
        assert not detect(np.zeros(8), reference, tau=score + 1e-9).detected


class TestNullCheck:
    def test_false_positive_rate_under_bound(self) -> None:
        """Тест: на случайных «чистых» выходах доля срабатываний ≤ 10^−τ с запасом."""
        rng = np.random.default_rng(42)
        soft = rng.random((20, 16))
        result = null_check(soft, trials_per_image=500, rng=rng, tau=3.0)

        assert result.n_trials == 10_000
        assert result.bound == pytest.approx(1e-3)
        assert result.empirical_fpr <= 5 * result.bound

    def test_zero_tau_always_fires(self) -> None:
        rng = np.random.default_rng(1)
        result = null_check(rng.random((2, 8)), trials_per_image=10, rng=rng, tau=0.0)

        assert result.false_positives == result.n_trials
