"""
Unit-тесты JND-карты, PSNR/SSIM и JPEG-подобного кодека.
"""

import numpy as np
import pytest

from core.exceptions import AttackError, ValidationError
from services.quality_service import jnd_map, luminance_term, psnr, ssim
from utils.jpeg_codec import jpeg_like


class TestJND:
    def test_mid_gray_value(self) -> None:
        """Тест: ровный серый 0.5 — без текстуры, яркостный член 0.2·0.2/0.7."""
        value = jnd_map(np.full((3, 16, 16), 0.5))

        assert value.shape == (16, 16)
        assert np.allclose(value, 0.1 + 0.3 * (0.2 * 0.2 / 0.7), atol=1e-12)

    def test_black_gets_dark_bonus(self) -> None:
        assert np.allclose(jnd_map(np.zeros((3, 8, 8))), 0.4)

    def test_range_and_batch(self, textured_image: np.ndarray) -> None:
        batch = np.stack([textured_image, textured_image])
        values = jnd_map(batch)

        assert values.shape == (2, 48, 48)
        assert values.min() >= 0.1 and values.max() <= 1.0
        assert np.array_equal(values[0], jnd_map(textured_image))

    def test_texture_raises_tolerance(self) -> None:
        flat = np.full((3, 16, 16), 0.5)
        checker = flat.copy()
        checker[:, ::2, :] = 0.3
        checker[:, 1::2, :] = 0.7

        assert jnd_map(checker).mean() > jnd_map(flat).mean()

    def test_luminance_term_continuous_at_knee(self) -> None:
        assert luminance_term(0.3) == pytest.approx(0.0)

    def test_rejects_non_finite(self) -> None:
        image = np.full((3, 8, 8), 0.5)
        image[0, 0, 0] = np.nan
        with pytest.raises(ValidationError):
            jnd_map(image)


class TestMetrics:
    def test_identical_images(self, textured_image: np.ndarray) -> None:
        assert psnr(textured_image, textured_image) == float("inf")
        assert ssim(textured_image, textured_image) == pytest.approx(1.0)

    def test_psnr_known_value(self) -> None:
        a = np.zeros((3, 4, 4))
        assert psnr(a, a + 0.1) == pytest.approx(20.0)

    def test_ssim_drops_with_noise(
        self, textured_image: np.ndarray, rng: np.random.Generator
    ) -> None:
        noisy = np.clip(textured_image + rng.normal(0.0, 0.1, textured_image.shape), 0.0, 1.0)

        assert ssim(textured_image, noisy) < 0.95

    def test_shape_mismatch(self) -> None:
        with pytest.raises(ValidationError):
            psnr(np.zeros((3, 4, 4)), np.zeros((3, 4, 5)))

    def test_ssim_too_small(self) -> None:
        with pytest.raises(ValidationError):
            ssim(np.zeros((3, 8, 8)), np.zeros((3, 8, 8)))


class TestJpegLike:
    def test_high_quality_is_close(self, textured_image: np.ndarray) -> None:
        assert psnr(textured_image, jpeg_like(textured_image, 100)) >= 40.0

    def test_quality_monotone(self, textured_image: np.ndarray) -> None:
        scores = [psnr(textured_image, jpeg_like(textured_image, q)) for q in (10, 50, 90)]

        assert scores[0] < scores[1] < scores[2]

    def test_constant_gray_preserved(self) -> None:
        gray = np.full((3, 20, 20), 0.5)

        assert np.abs(jpeg_like(gray, 30) - gray).max() <= 1.0 / 255.0 + 1e-9

    def test_shape_preserved_for_odd_sizes(self, rng: np.random.Generator) -> None:
        image = rng.random((2, 3, 19, 23))

        assert jpeg_like(image, 75).shape == image.shape

    @pytest.mark.parametrize("quality", [0, 101])
    def test_invalid_quality(self, quality: int) -> None:
        with pytest.raises(AttackError):
            jpeg_like(np.zeros((3, 8, 8)), quality)
