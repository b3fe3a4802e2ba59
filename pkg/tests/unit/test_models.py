"""
Unit-тесты моделей: формы, детерминизм, временной пулинг, bundle.
"""

import numpy as np
import pytest

from core.exceptions import CheckpointError, ShapeError, ValidationError
from models import ModelBundle, discriminate, embed, extract, receptive_field, temporal_pooled_embed
from models.bundle import expected_shapes
from schemas.model import ArchConfig, BitMessage


@pytest.fixture
def frames(rng: np.random.Generator, tiny_arch: ArchConfig) -> np.ndarray:
    return rng.random((5, 3, tiny_arch.model_res, tiny_arch.model_res))


class TestShapes:
    def test_embed_output_range_and_shape(
        self, tiny_bundle: ModelBundle, frames: np.ndarray, message: BitMessage
    ) -> None:
        w = embed(tiny_bundle, frames, message)

        assert w.shape == frames.shape
        assert np.all(np.abs(w) <= 1.0)

    def test_extract_output(self, tiny_bundle: ModelBundle, frames: np.ndarray) -> None:
        soft = extract(tiny_bundle, frames)

        assert soft.shape == (5, tiny_bundle.arch.n_bits)
        assert np.all((soft >= 0.0) & (soft <= 1.0))

    def test_wrong_resolution_rejected(self, tiny_bundle: ModelBundle, message: BitMessage) -> None:
        with pytest.raises(ValidationError):
            embed(tiny_bundle, np.zeros((3, 32, 32)), message)

    def test_wrong_message_length_rejected(
        self, tiny_bundle: ModelBundle, frames: np.ndarray
    ) -> None:
        with pytest.raises(ValidationError):
            embed(tiny_bundle, frames, BitMessage.from_hex("abcd", 16))

    def test_per_row_messages(
        self, tiny_bundle: ModelBundle, frames: np.ndarray, rng: np.random.Generator
    ) -> None:
        rows = rng.integers(0, 2, size=(5, tiny_bundle.arch.n_bits)).astype(np.float64)
        single = embed(tiny_bundle, frames[2], rows[2])

        assert np.allclose(embed(tiny_bundle, frames, rows)[2:3], single, atol=1e-12)


class TestDiscriminator:
    def test_receptive_field(self) -> None:
        assert receptive_field() == 46

    def test_patch_logits(self, tiny_bundle: ModelBundle, rng: np.random.Generator) -> None:
        logits = discriminate(tiny_bundle, rng.random((2, 3, 64, 48)))

        assert logits.shape == (2, 1, 4, 3)

    def test_too_small_image_raises(self, tiny_bundle: ModelBundle) -> None:
        with pytest.raises(ShapeError):
            discriminate(tiny_bundle, np.zeros((1, 3, 32, 64)))


class TestDeterminism:
    def test_same_seed_same_weights(self, tiny_arch: ArchConfig) -> None:
        a = ModelBundle.initialize(tiny_arch, seed=3)
        b = ModelBundle.initialize(tiny_arch, seed=3)

        assert a.model_hash() == b.model_hash()
        assert a.model_hash() != ModelBundle.initialize(tiny_arch, seed=4).model_hash()

    def test_embed_is_deterministic(
        self, tiny_bundle: ModelBundle, frames: np.ndarray, message: BitMessage
    ) -> None:
        first = embed(tiny_bundle, frames, message)
        assert np.array_equal(first, embed(tiny_bundle, frames, message))


class TestTemporalPooling:
    def test_k1_matches_per_frame(
        self, tiny_bundle: ModelBundle, frames: np.ndarray, message: BitMessage
    ) -> None:
        pooled = temporal_pooled_embed(tiny_bundle, frames, message, k=1, d=1)

        assert np.array_equal(pooled, embed(tiny_bundle, frames, message))

    @pytest.mark.parametrize("d", [0, 1, 2])
    def test_constant_video_matches_single_frame(
        self, tiny_bundle: ModelBundle, frames: np.ndarray, message: BitMessage, d: int
    ) -> None:
        """Тест: одинаковые кадры дают тот же водяной знак, что и один кадр."""
        video = np.repeat(frames[:1], 6, axis=0)
        pooled = temporal_pooled_embed(tiny_bundle, video, message, k=4, d=d)
        single = embed(tiny_bundle, frames[0], message)

        assert pooled.shape == video.shape
        assert np.allclose(pooled, np.repeat(single, 6, axis=0), atol=1e-12)

    def test_invalid_parameters(
        self, tiny_bundle: ModelBundle, frames: np.ndarray, message: BitMessage
    ) -> None:
        with pytest.raises(ShapeError):
            temporal_pooled_embed(tiny_bundle, frames, message, k=0, d=1)
        with pytest.raises(ShapeError):
            temporal_pooled_embed(tiny_bundle, frames, message, k=2, d=3)


class TestBundle:
    def test_named_arrays_round_trip(self, tiny_bundle: ModelBundle) -> None:
        arrays = dict(tiny_bundle.named_arrays())
        restored = ModelBundle.from_named_arrays(tiny_bundle.arch, arrays)

        assert restored.model_hash() == tiny_bundle.model_hash()
        nets = {"embedder", "extractor", "discriminator"}
        assert all(name.split("/")[0] in nets for name in arrays)

    def test_unknown_tensor_rejected(self, tiny_bundle: ModelBundle) -> None:
        arrays = dict(tiny_bundle.named_arrays())
        arrays["extractor/bogus"] = np.zeros(1)

        with pytest.raises(CheckpointError):
            ModelBundle.from_named_arrays(tiny_bundle.arch, arrays)

    def test_missing_tensor_rejected(self, tiny_bundle: ModelBundle) -> None:
        arrays = dict(tiny_bundle.named_arrays())
        arrays.pop(next(iter(arrays)))

        with pytest.raises(CheckpointError):
            ModelBundle.from_named_arrays(tiny_bundle.arch, arrays)

    def test_wrong_shape_rejected(self, tiny_bundle: ModelBundle) -> None:
        arrays = dict(tiny_bundle.named_arrays())
        name = next(iter(arrays))
        arrays[name] = np.zeros(arrays[name].shape + (1,))

        with pytest.raises(CheckpointError):
            ModelBundle.from_named_arrays(tiny_bundle.arch, arrays)

    def test_expected_shapes_match_initialized(self, tiny_bundle: ModelBundle) -> None:
        shapes = expected_shapes(tiny_bundle.arch)

        for net, expected in shapes.items():
            assert expected == {n: a.shape for n, a in tiny_bundle.network(net).items()}

    def test_loading_skips_random_init(self, tiny_bundle: ModelBundle, mocker) -> None:
        """Тест: проверка форм при загрузке не инициализирует сети заново."""
        arrays = dict(tiny_bundle.named_arrays())
        init = mocker.patch.object(ModelBundle, "initialize")
        rng = mocker.patch("numpy.random.default_rng")

        ModelBundle.from_named_arrays(tiny_bundle.arch, arrays)

        init.assert_not_called()
        rng.assert_not_called()

    def test_copy_is_independent(self, tiny_bundle: ModelBundle) -> None:
        clone = tiny_bundle.copy()
        name = next(iter(clone.embedder))
        clone.embedder[name] += 1.0

        assert clone.model_hash() != tiny_bundle.model_hash()

    def test_invalid_arch_rejected(self) -> None:
        with pytest.raises(ValueError):
            ArchConfig(model_res=20, depth=3)
