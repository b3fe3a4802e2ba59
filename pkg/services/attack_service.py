"""
Атаки: дифференцируемые преобразования изображений и наборы атак для оценки.

apply_attack_tensor работает с ndgrad.Tensor и используется при обучении
(градиент проходит через ресемплинг, цветовые матрицы и размытие, а через
JPEG и кодеки — по straight-through). apply_attack — обёртка над массивами
для оценки. В режиме eval_deterministic rng не используется.
"""

from __future__ import annotations

import logging
from typing import Callable, Dict, List, Optional

import numpy as np

from config.constants import (
    CATEGORY_ORDER,
    COMBINED_BRIGHTNESS,
    COMBINED_CROP,
    GEOMETRIC_FILL,
    IMAGE_COMBINED_JPEG,
    IMAGE_GEOMETRIC_GRID,
    IMAGE_JPEG_QUALITIES,
    IMAGE_VALUEMETRIC_GRID,
    LUMA_WEIGHTS,
    TRAIN_ATTACK_RANGES,
    TRAIN_MILD_RANGES,
    VIDEO_CODEC_CRFS,
    VIDEO_CODECS,
    VIDEO_GEOMETRIC_GRID,
    VIDEO_JPEG_QUALITIES,
    VIDEO_VALUEMETRIC_GRID,
)
from core.exceptions import AttackError, ShapeError
from ndgrad import Tensor, nn, ops, resample
from schemas.attack import (
    GEOMETRIC_KINDS,
    VALUEMETRIC_KINDS,
    AttackCategory,
    AttackKind,
    AttackMode,
    AttackSpec,
    AttackSuite,
)
from services.codec_hook import ExternalCodec
from utils.color import grayscale_matrix, hue_matrix, is_gray, saturation_matrix
from utils.jpeg_codec import jpeg_like


logger = logging.getLogger(__name__)


# --- параметры ----------------------------------------------------------------


def _strength(spec: AttackSpec, rng: Optional[np.random.Generator]) -> float:
    """Фиксированный параметр или равномерная выборка из [strength, strength_max]."""
    if spec.mode == AttackMode.EVAL_DETERMINISTIC or spec.strength_max is None:
        return float(spec.strength)
    if rng is None:
        raise AttackError(
            "Режим train_random требует генератор случайных чисел",
            {"kind": spec.kind.value},
        )
    return float(rng.uniform(spec.strength, spec.strength_max))


def _odd_kernel(spec: AttackSpec, rng: Optional[np.random.Generator]) -> int:
    if spec.mode == AttackMode.EVAL_DETERMINISTIC or spec.strength_max is None:
        return int(spec.strength)
    if rng is None:
        raise AttackError(
            "Режим train_random требует генератор случайных чисел",
            {"kind": spec.kind.value},
        )
    choices = [k for k in range(int(spec.strength), int(spec.strength_max) + 1) if k % 2 == 1]
    if not choices:
        raise AttackError(
            "В диапазоне нет нечётных ядер",
            {"range": (spec.strength, spec.strength_max)},
        )
    return int(rng.choice(choices))


# --- цветовые преобразования --------------------------------------------------


def _color_transform(x: Tensor, matrix: np.ndarray) -> Tensor:
    weight = Tensor(np.asarray(matrix, dtype=x.dtype)[:, :, None, None])
    return nn.conv2d(x, weight, padding="valid")


def _luma(x: Tensor) -> Tensor:
    weight = Tensor(np.asarray(LUMA_WEIGHTS, dtype=x.dtype).reshape(1, 3, 1, 1))
    return nn.conv2d(x, weight, padding="valid")


def brightness(x: Tensor, factor: float) -> Tensor:
    return x * factor


def contrast(x: Tensor, factor: float) -> Tensor:
    """c·(x − ȳ) + ȳ, ȳ — средняя яркость изображения."""
    mean_luma = ops.mean(_luma(x), axis=(1, 2, 3), keepdims=True)
    return (x - mean_luma) * factor + mean_luma


def saturation(x: Tensor, factor: float) -> Tensor:
    return _color_transform(x, saturation_matrix(factor))


def hue(x: Tensor, shift: float) -> Tensor:
    if shift == 0.0:
        return x
    return _color_transform(x, hue_matrix(shift))


def grayscale(x: Tensor) -> Tensor:
    if is_gray(x.data):
        return x
    return _color_transform(x, grayscale_matrix())


def gaussian_kernel(size: int) -> np.ndarray:
    """Ядро 1D; σ = 0.3·((k − 1)/2 − 1) + 0.8."""
    if size < 1 or size % 2 == 0:
        raise AttackError("Размер ядра размытия должен быть нечётным", {"kernel": size})
    sigma = 0.3 * ((size - 1) / 2.0 - 1.0) + 0.8
    half = size // 2
    g = np.exp(-(np.arange(-half, half + 1, dtype=np.float64) ** 2) / (2.0 * sigma**2))
    return g / g.sum()


def gaussian_blur(x: Tensor, size: int) -> Tensor:
    """Сепарабельное размытие по каналам с отражением на границах."""
    g = gaussian_kernel(size)
    if size == 1:
        return x
    half = size // 2
    channels = x.shape[1]
    eye = np.eye(channels, dtype=x.dtype)
    horizontal = Tensor(eye[:, :, None, None] * g.astype(x.dtype)[None, None, None, :])
    vertical = Tensor(eye[:, :, None, None] * g.astype(x.dtype)[None, None, :, None])
    padded = nn.pad2d(x, half, half, mode="reflect")
    return nn.conv2d(nn.conv2d(padded, horizontal, padding="valid"), vertical, padding="valid")


# --- геометрия ----------------------------------------------------------------


def rotate(x: Tensor, angle: float) -> Tensor:
    """Поворот против часовой стрелки; кратные 90° — точная перестановка пикселей."""
    if float(angle) % 90.0 == 0.0:
        return resample.rot90(x, int(round(angle / 90.0)))
    h, w = x.shape[2:]
    return resample.warp(x, resample.rotation_homography(angle, h, w), fill=GEOMETRIC_FILL)


def crop(x: Tensor, side_ratio: float, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Вырезка доли стороны; без rng — по центру."""
    if not 0.0 < side_ratio <= 1.0:
        raise AttackError("Доля стороны crop должна быть в (0, 1]", {"side_ratio": side_ratio})
    h, w = x.shape[2:]
    ch, cw = max(1, int(round(h * side_ratio))), max(1, int(round(w * side_ratio)))
    if rng is None:
        top, left = (h - ch) // 2, (w - cw) // 2
    else:
        top, left = int(rng.integers(0, h - ch + 1)), int(rng.integers(0, w - cw + 1))
    return resample.crop(x, top, left, ch, cw)


def perspective(x: Tensor, scale: float, rng: Optional[np.random.Generator] = None) -> Tensor:
    """
    Перспективное искажение.

    Без rng — «трапеция»: верхние углы сдвигаются внутрь на scale·W/2.
    С rng — каждый угол сдвигается внутрь на случайную долю до scale.
    """
    if not 0.0 <= scale < 1.0:
        raise AttackError("Масштаб перспективы должен быть в [0, 1)", {"scale": scale})
    if scale == 0.0:
        return x
    h, w = x.shape[2:]
    src = np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])
    if rng is None:
        dx = scale * w / 2.0
        dst = np.array([[dx, 0.0], [w - dx, 0.0], [w, h], [0.0, h]])
    else:
        inward = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=np.float64)
        jitter = rng.uniform(0.0, scale, size=(4, 2)) * np.array([w / 2.0, h / 2.0])
        dst = src + inward * jitter
    try:
        homography = resample.homography_from_points(src, dst)
    except ShapeError as exc:
        raise AttackError("Вырожденная гомография перспективы", {"scale": scale}) from exc
    return resample.warp(x, homography, fill=GEOMETRIC_FILL)


def resize(x: Tensor, factor: float) -> Tensor:
    h, w = resample.output_size(x.shape[2:], factor)
    return resample.bilinear_resize(x, h, w)


# --- диспетчер ------------------------------------------------------------------


def _external(
    spec: AttackSpec, codec: Optional[ExternalCodec]
) -> Callable[[np.ndarray], np.ndarray]:
    codec = codec or ExternalCodec()

    def transform(frames: np.ndarray) -> np.ndarray:
        return codec.roundtrip(frames, spec.codec, int(spec.strength))

    return transform


def apply_attack_tensor(
    spec: AttackSpec,
    x: Tensor,
    rng: Optional[np.random.Generator] = None,
    codec: Optional[ExternalCodec] = None,
) -> Tensor:
    """
    Применить атаку к батчу (N, 3, H, W); результат зажат в [0, 1].

    Raises:
        AttackError: неизвестный вид или недопустимые параметры.
    """
    kind = spec.kind
    random_mode = spec.mode == AttackMode.TRAIN_RANDOM
    geo_rng = rng if random_mode else None

    if kind == AttackKind.IDENTITY:
        return x
    if kind == AttackKind.COMBINED:
        out = x
        for child in spec.children:
            out = apply_attack_tensor(child, out, rng, codec)
        return out

    if kind == AttackKind.BRIGHTNESS:
        out = brightness(x, _strength(spec, rng))
    elif kind == AttackKind.CONTRAST:
        out = contrast(x, _strength(spec, rng))
    elif kind == AttackKind.SATURATION:
        out = saturation(x, _strength(spec, rng))
    elif kind == AttackKind.HUE:
        out = hue(x, _strength(spec, rng))
    elif kind == AttackKind.GRAYSCALE:
        out = grayscale(x)
    elif kind == AttackKind.GAUSSIAN_BLUR:
        out = gaussian_blur(x, _odd_kernel(spec, rng))
    elif kind == AttackKind.HORIZONTAL_FLIP:
        return resample.flip_horizontal(x)
    elif kind == AttackKind.ROTATE:
        out = rotate(x, _strength(spec, rng))
    elif kind == AttackKind.CROP:
        return crop(x, _strength(spec, rng), geo_rng)
    elif kind == AttackKind.PERSPECTIVE:
        out = perspective(x, _strength(spec, rng), geo_rng)
    elif kind == AttackKind.RESIZE:
        out = resize(x, _strength(spec, rng))
    elif kind == AttackKind.JPEG_LIKE:
        quality = int(round(_strength(spec, rng)))
        return ops.straight_through(lambda a: jpeg_like(a, quality), x)
    elif kind == AttackKind.EXTERNAL_CODEC:
        return ops.straight_through(_external(spec, codec), x)
    else:
        raise AttackError("Неизвестный вид атаки", {"kind": str(kind)})

    if out is x:
        return x
    return ops.clamp(out, 0.0, 1.0)


def apply_attack(
    spec: AttackSpec,
    image: np.ndarray,
    rng: Optional[np.random.Generator] = None,
    codec: Optional[ExternalCodec] = None,
) -> np.ndarray:
    """
    Атака над массивом (3, H, W) или (N, 3, H, W).

    identity и другие тождественные случаи возвращают точную копию входа.
    """
    array = np.asarray(image)
    squeeze = array.ndim == 3
    batch = array[None] if squeeze else array
    if batch.ndim != 4:
        raise AttackError(
            "Ожидается изображение (3, H, W) или батч (N, 3, H, W)",
            {"shape": array.shape},
        )
    out = apply_attack_tensor(spec, Tensor(batch), rng, codec).data
    if out is batch:
        out = batch.copy()
    return out[0] if squeeze else out


def attack_sequence(
    spec: AttackSpec,
    frames: np.ndarray,
    codec: Optional[ExternalCodec] = None,
) -> np.ndarray:
    """
    Атака над видео (T, 3, H, W): кодек применяется ко всей
    последовательности, остальные атаки — покадрово.
    """
    if spec.kind == AttackKind.COMBINED:
        out = frames
        for child in spec.children:
            out = attack_sequence(child, out, codec)
        return out
    if spec.kind == AttackKind.EXTERNAL_CODEC:
        return _external(spec, codec)(np.asarray(frames))
    return np.stack([apply_attack(spec, frame, codec=codec) for frame in frames])


# --- категории и наборы -------------------------------------------------------


def category_of(spec: AttackSpec) -> AttackCategory:
    if spec.kind == AttackKind.IDENTITY:
        return AttackCategory.IDENTITY
    if spec.kind == AttackKind.COMBINED:
        return AttackCategory.COMBINED
    if spec.kind in (AttackKind.JPEG_LIKE, AttackKind.EXTERNAL_CODEC):
        return AttackCategory.COMPRESSION
    if spec.kind in VALUEMETRIC_KINDS:
        return AttackCategory.VALUEMETRIC
    if spec.kind in GEOMETRIC_KINDS:
        return AttackCategory.GEOMETRIC
    raise AttackError("Атака без категории", {"kind": spec.kind.value})


def _grid_specs(grid: Dict[str, List[float]]) -> List[AttackSpec]:
    return [
        AttackSpec(kind=AttackKind(kind), strength=value)
        for kind, values in grid.items()
        for value in values
    ]


def _valuemetric_specs(grid: Dict[str, List[float]]) -> List[AttackSpec]:
    # Размытие идёт последним, после grayscale
    specs = _grid_specs({k: v for k, v in grid.items() if k != "gaussian_blur"})
    specs.append(AttackSpec(kind=AttackKind.GRAYSCALE))
    return specs + _grid_specs({"gaussian_blur": grid["gaussian_blur"]})


def _jpeg_specs(qualities: List[int]) -> List[AttackSpec]:
    return [AttackSpec(kind=AttackKind.JPEG_LIKE, strength=q) for q in qualities]


def _combined(first: AttackSpec) -> AttackSpec:
    return AttackSpec(
        kind=AttackKind.COMBINED,
        children=[
            first,
            AttackSpec(kind=AttackKind.CROP, strength=COMBINED_CROP),
            AttackSpec(kind=AttackKind.BRIGHTNESS, strength=COMBINED_BRIGHTNESS),
        ],
    )


def _codec_spec(codec: str, crf: int) -> AttackSpec:
    return AttackSpec(kind=AttackKind.EXTERNAL_CODEC, strength=crf, codec=codec)


def build_suites(kind: str = "image") -> List[AttackSuite]:
    """
    Наборы атак по категориям в порядке колонок отчёта.

    kind: "image", "video", "identity" или "combined".
    """
    identity = AttackSuite(
        category=AttackCategory.IDENTITY, specs=[AttackSpec(kind=AttackKind.IDENTITY)]
    )
    if kind == "identity":
        return [identity]

    flip = AttackSpec(kind=AttackKind.HORIZONTAL_FLIP)
    if kind in ("image", "combined"):
        combined = AttackSuite(
            category=AttackCategory.COMBINED,
            specs=[_combined(spec) for spec in _jpeg_specs(IMAGE_COMBINED_JPEG)],
        )
        if kind == "combined":
            return [combined]
        valuemetric = _valuemetric_specs(IMAGE_VALUEMETRIC_GRID)
        geometric = [flip] + _grid_specs(IMAGE_GEOMETRIC_GRID)
        compression = _jpeg_specs(IMAGE_JPEG_QUALITIES)
    elif kind == "video":
        valuemetric = _valuemetric_specs(VIDEO_VALUEMETRIC_GRID)
        geometric = [flip] + _grid_specs(VIDEO_GEOMETRIC_GRID)
        compression = _jpeg_specs(VIDEO_JPEG_QUALITIES) + [
            _codec_spec(codec, crf) for codec in VIDEO_CODECS for crf in VIDEO_CODEC_CRFS
        ]
        combined = AttackSuite(
            category=AttackCategory.COMBINED,
            specs=[_combined(_codec_spec("h264", crf)) for crf in VIDEO_CODEC_CRFS],
        )
    else:
        raise AttackError("Неизвестный набор атак", {"kind": kind})

    suites = {
        "identity": identity,
        "valuemetric": AttackSuite(category=AttackCategory.VALUEMETRIC, specs=valuemetric),
        "compression": AttackSuite(category=AttackCategory.COMPRESSION, specs=compression),
        "geometric": AttackSuite(category=AttackCategory.GEOMETRIC, specs=geometric),
        "combined": combined,
    }
    return [suites[name] for name in CATEGORY_ORDER]


# --- выборка атак при обучении ---------------------------------------------------


def _train_spec(kind: AttackKind, ranges: Dict[str, tuple]) -> AttackSpec:
    key = "jpeg" if kind == AttackKind.JPEG_LIKE else kind.value
    lo, hi = ranges[key]
    return AttackSpec(kind=kind, strength=lo, strength_max=hi, mode=AttackMode.TRAIN_RANDOM)


_TRAIN_VALUEMETRIC = [
    AttackKind.BRIGHTNESS,
    AttackKind.CONTRAST,
    AttackKind.SATURATION,
    AttackKind.HUE,
    AttackKind.GRAYSCALE,
    AttackKind.GAUSSIAN_BLUR,
]
_TRAIN_GEOMETRIC = [
    AttackKind.HORIZONTAL_FLIP,
    AttackKind.ROTATE,
    AttackKind.CROP,
    AttackKind.PERSPECTIVE,
    AttackKind.RESIZE,
]


def _train_kind_spec(kind: AttackKind) -> AttackSpec:
    if kind in (AttackKind.GRAYSCALE, AttackKind.HORIZONTAL_FLIP):
        return AttackSpec(kind=kind, mode=AttackMode.TRAIN_RANDOM)
    return _train_spec(kind, TRAIN_ATTACK_RANGES)


def sample_training_attack(rng: np.random.Generator, mild: bool = False) -> AttackSpec:
    """
    Случайная атака для шага обучения.

    Категория выбирается равномерно из {identity, valuemetric, geometric,
    compression, combined}, затем вид внутри категории. mild — только
    identity и слабые яркость/контраст (начало стадии 1).
    """
    if mild:
        options = [AttackSpec(kind=AttackKind.IDENTITY)] + [
            _train_spec(AttackKind(kind), TRAIN_MILD_RANGES) for kind in TRAIN_MILD_RANGES
        ]
        return options[int(rng.integers(len(options)))]

    category = CATEGORY_ORDER[int(rng.integers(len(CATEGORY_ORDER)))]
    if category == "identity":
        return AttackSpec(kind=AttackKind.IDENTITY)
    if category == "valuemetric":
        return _train_kind_spec(_TRAIN_VALUEMETRIC[int(rng.integers(len(_TRAIN_VALUEMETRIC)))])
    if category == "geometric":
        return _train_kind_spec(_TRAIN_GEOMETRIC[int(rng.integers(len(_TRAIN_GEOMETRIC)))])
    if category == "compression":
        return _train_spec(AttackKind.JPEG_LIKE, TRAIN_ATTACK_RANGES)
    return AttackSpec(
        kind=AttackKind.COMBINED,
        mode=AttackMode.TRAIN_RANDOM,
        children=[
            _train_spec(AttackKind.JPEG_LIKE, TRAIN_ATTACK_RANGES),
            _train_spec(AttackKind.CROP, TRAIN_ATTACK_RANGES),
            _train_spec(AttackKind.BRIGHTNESS, TRAIN_ATTACK_RANGES),
        ],
    )
