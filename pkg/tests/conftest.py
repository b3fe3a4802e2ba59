"""
Pytest fixtures для всех тестов.

Маленькая архитектура (model_res 16, depth 2) держит тесты быстрыми;
полные приёмочные прогоны помечены @pytest.mark.slow.
"""

import gc
import shutil
import tempfile
from pathlib import Path
from typing import Generator

import numpy as np
import pytest

from config.settings import settings
from models import ModelBundle
from repositories.runs_repo import RunsRepository
from schemas.model import ArchConfig, BitMessage
from schemas.training import TrainConfig
from services.dataset_service import DatasetService, ImageDataset, synthetic_textured_image


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Временная директория (удаляется даже при незакрытых SQLite-файлах)."""
    tmpdir = tempfile.mkdtemp()
    try:
        yield Path(tmpdir)
    finally:
        gc.collect()
        shutil.rmtree(tmpdir, ignore_errors=True)


@pytest.fixture
def temp_db(temp_dir: Path) -> Path:
    return temp_dir / "runs.db"


@pytest.fixture(autouse=True)
def no_history(monkeypatch: pytest.MonkeyPatch) -> None:
    """Тесты не пишут историю запусков в рабочую БД."""
    monkeypatch.setattr(settings, "record_history", False)
    monkeypatch.setattr(settings, "external_encoder", None)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_arch() -> ArchConfig:
    return ArchConfig(
        model_res=16, n_bits=8, base_channels=4, depth=2, msg_embed_channels=4, norm_groups=4
    )


@pytest.fixture
def tiny_bundle(tiny_arch: ArchConfig) -> ModelBundle:
    return ModelBundle.initialize(tiny_arch, seed=7, dtype="float64")


@pytest.fixture
def message(tiny_arch: ArchConfig) -> BitMessage:
    return BitMessage.from_hex("a5", tiny_arch.n_bits)


@pytest.fixture
def textured_image() -> np.ndarray:
    """(3, 48, 48) — не меньше рецептивного поля дискриминатора."""
    return synthetic_textured_image(np.random.default_rng(5), 48)


@pytest.fixture
def small_dataset() -> ImageDataset:
    return DatasetService().synthetic(count=4, size=48, seed=3)


@pytest.fixture
def fast_train_config() -> TrainConfig:
    """Несколько шагов на 48×48 без атак и без насыщения."""
    return TrainConfig(
        lambda_adv=0.1,
        n_start=4,
        n_end=8,
        s_min=48,
        s_max=48,
        lr=1e-3,
        warmup_steps=2,
        stage3_steps=2,
        batch_size=2,
        saturation_window=2,
        require_saturation=False,
        use_attacks=False,
        checkpoint_every=3,
        log_every=1,
        precision="float64",
    )


@pytest.fixture
def sample_png(temp_dir: Path, textured_image: np.ndarray) -> Path:
    return DatasetService().save_image(temp_dir / "images" / "sample.png", textured_image)


@pytest.fixture
def image_dir(temp_dir: Path) -> Path:
    """Директория с тремя PNG и одним PPM 48×48."""
    service = DatasetService()
    directory = temp_dir / "dataset"
    rng = np.random.default_rng(11)
    for i in range(3):
        service.save_image(directory / f"img_{i:02d}.png", synthetic_textured_image(rng, 48))
    service.save_image(directory / "img_03.ppm", synthetic_textured_image(rng, 48))
    return directory


@pytest.fixture
def runs_repo(temp_db: Path) -> RunsRepository:
    repo = RunsRepository(temp_db)
    repo.create_table()
    return repo
