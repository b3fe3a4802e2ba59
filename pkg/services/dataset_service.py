"""
Загрузка изображений и видеокадров, синтетический текстурный датасет.

Поддерживаются PNG (8 бит RGB) и бинарный PPM; значения переводятся в
[0, 1] делением на 255. Кадры видео — файлы с номерами в одной директории.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from core.exceptions import DataError


logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".ppm")


@dataclass
class ImageDataset:
    """Набор изображений (3, H, W) в памяти; размеры могут различаться."""

    images: List[np.ndarray] = field(default_factory=list)
    source: str = "memory"

    def __len__(self) -> int:
        return len(self.images)

    def __getitem__(self, index: int) -> np.ndarray:
        return self.images[index]

    def sample_batch(self, rng: np.random.Generator, batch_size: int) -> List[np.ndarray]:
        """Случайный батч (с повторами, если изображений меньше batch_size)."""
        if not self.images:
            raise DataError("Датасет пуст", {"source": self.source})
        replace = batch_size > len(self.images)
        indices = rng.choice(len(self.images), size=batch_size, replace=replace)
        return [self.images[int(i)] for i in indices]

    def head(self, count: Optional[int]) -> "ImageDataset":
        if count is None:
            return self
        return ImageDataset(images=self.images[:count], source=self.source)


class DatasetService:
    """Сервис чтения/записи изображений и сборки датасетов."""

    def load_image(self, path: Path) -> np.ndarray:
        """
        Прочитать PNG/PPM в массив (3, H, W) float64.

        Raises:
            DataError: файла нет или формат не распознан.
        """
        path = Path(path)
        if not path.is_file():
            raise DataError(f"Файл изображения не найден: {path}", {"path": str(path)})
        try:
            with Image.open(path) as img:
                rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
        except (UnidentifiedImageError, OSError) as exc:
            logger.exception(f"Не удалось прочитать изображение {path}")
            raise DataError(
                f"Не удалось прочитать изображение: {path}",
                {"path": str(path), "error": str(exc)},
            ) from exc
        return rgb.transpose(2, 0, 1) / 255.0

    def save_image(self, path: Path, image: np.ndarray) -> Path:
        """
        Записать (3, H, W) в [0, 1] как 8-битный PNG или PPM (по расширению).

        Raises:
            DataError: неподдерживаемое расширение или ошибка записи.
        """
        path = Path(path)
        suffix = path.suffix.lower()
        if suffix not in IMAGE_SUFFIXES:
            raise DataError("Поддерживаются только .png и .ppm", {"path": str(path)})
        array = np.asarray(image, dtype=np.float64)
        if array.ndim != 3 or array.shape[0] != 3:
            raise DataError("Ожидается изображение (3, H, W)", {"shape": array.shape})
        pixels = np.round(np.clip(array, 0.0, 1.0) * 255.0).astype(np.uint8).transpose(1, 2, 0)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            Image.fromarray(pixels).save(path, format="PNG" if suffix == ".png" else "PPM")
        except OSError as exc:
            logger.exception(f"Не удалось записать изображение {path}")
            raise DataError(
                f"Не удалось записать изображение: {path}",
                {"path": str(path)},
            ) from exc
        return path

    def list_images(self, directory: Path) -> List[Path]:
        directory = Path(directory)
        if not directory.is_dir():
            raise DataError(f"Директория не найдена: {directory}", {"path": str(directory)})
        return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)

    def load_directory(self, directory: Path, limit: Optional[int] = None) -> ImageDataset:
        """
        Все PNG/PPM из директории в порядке имён.

        Raises:
            DataError: директории нет или в ней нет изображений.
        """
        paths = self.list_images(directory)[:limit] if limit else self.list_images(directory)
        if not paths:
            raise DataError(f"В директории нет изображений: {directory}", {"path": str(directory)})
        images = [self.load_image(p) for p in paths]
        logger.info(f"Загружено {len(images)} изображений из {directory}")
        return ImageDataset(images=images, source=str(directory))

    def load_frames(self, directory: Path) -> np.ndarray:
        """
        Кадры видео (T, 3, H, W) из файлов с номерами (frame_0001.png, …).

        Raises:
            DataError: нет кадров или их размеры различаются.
        """
        paths = self.list_images(directory)
        if not paths:
            raise DataError(
                f"Пустая последовательность кадров: {directory}",
                {"path": str(directory)},
            )
        frames = [self.load_image(p) for p in paths]
        shapes = {f.shape for f in frames}
        if len(shapes) != 1:
            raise DataError(
                "Кадры разного размера",
                {"path": str(directory), "shapes": sorted(shapes)},
            )
        return np.stack(frames)

    def synthetic(self, count: int, size: int, seed: int) -> ImageDataset:
        """Синтетический текстурный датасет: одинаковый seed → одинаковые изображения."""
        if count < 1:
            raise DataError("Размер синтетического датасета должен быть ≥ 1", {"count": count})
        rng = np.random.default_rng(seed)
        images = [synthetic_textured_image(rng, size) for _ in range(count)]
        logger.info(f"Сгенерировано {count} синтетических изображений {size}×{size}")
        return ImageDataset(images=images, source=f"synthetic:{count}x{size}:{seed}")


def _grating(rng: np.random.Generator, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
    angle = rng.uniform(0.0, np.pi)
    freq = rng.uniform(2.0, 12.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    projection = xx * np.cos(angle) + yy * np.sin(angle)
    return 0.5 + 0.5 * np.sin(2.0 * np.pi * freq * projection + phase)


def _blobs(rng: np.random.Generator, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
    out = np.zeros_like(xx)
    for _ in range(int(rng.integers(3, 9))):
        cy, cx = rng.uniform(0.0, 1.0, size=2)
        radius = rng.uniform(0.05, 0.3)
        falloff = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * radius**2))
        out += rng.uniform(0.3, 1.0) * falloff
    return np.clip(out, 0.0, 1.0)


def _gradient(rng: np.random.Generator, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
    a, b = rng.uniform(-1.0, 1.0, size=2)
    plane = a * xx + b * yy
    return (plane - plane.min()) / max(float(np.ptp(plane)), 1e-6)


def _filtered_noise(rng: np.random.Generator, size: int) -> np.ndarray:
    noise = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma=rng.uniform(0.8, 4.0))
    noise -= noise.min()
    return noise / max(float(noise.max()), 1e-6)


def synthetic_textured_image(rng: np.random.Generator, size: int) -> np.ndarray:
    """
    Изображение (3, size, size): смесь решёток, пятен, градиентов и
    отфильтрованного шума с независимым цветом для каждого слоя.
    """
    yy, xx = np.meshgrid(np.linspace(0.0, 1.0, size), np.linspace(0.0, 1.0, size), indexing="ij")
    layers: Sequence[np.ndarray] = (
        _grating(rng, yy, xx),
        _blobs(rng, yy, xx),
        _gradient(rng, yy, xx),
        _filtered_noise(rng, size),
    )
    weights = rng.dirichlet(np.ones(len(layers)))
    image = np.zeros((3, size, size))
    for weight, layer in zip(weights, layers):
        color = rng.uniform(0.2, 1.0, size=3)
        image += weight * color[:, None, None] * layer[None]
    return np.clip(image, 0.0, 1.0)
