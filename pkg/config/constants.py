"""
Константы: таблицы квантования, сетки атак, коды выхода и т.п.

Единое место для магических чисел.
"""

from typing import Dict, List, Tuple

# Версии форматов
CHECKPOINT_MAGIC = b"SEALKIT\x00"
CHECKPOINT_VERSION = 1
REPORT_SCHEMA_VERSION = "sealkit.eval/1"

# Коды выхода CLI
EXIT_OK = 0
EXIT_NOT_DETECTED = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

# Порог детекции по −log10 p (FPR ≤ 1e-4 на изображение)
DEFAULT_TAU = 4.0

# Клиппинг мягкого сообщения в BCE
BCE_EPS = 1e-7

# Порог 0.5 при бинаризации; ничья → 1
BIT_THRESHOLD = 0.5

# Яркость по Rec.601
LUMA_WEIGHTS: Tuple[float, float, float] = (0.299, 0.587, 0.114)

# Заливка областей вне кадра при rotate/perspective
GEOMETRIC_FILL = 0.5

# Параметры JND-карты
JND_LAMBDA_MIN = 0.1
JND_LAMBDA_LUM = 0.3
JND_LAMBDA_TEX = 0.9
JND_DARK_KNEE = 0.3
JND_BRIGHT_SLOPE = 0.2
JND_TEXTURE_G0 = 0.25
JND_WINDOW = 5

# SSIM
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

# Базовые таблицы квантования JPEG (ITU-T T.81, Annex K)
JPEG_LUMA_TABLE: List[List[int]] = [
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
]
JPEG_CHROMA_TABLE: List[List[int]] = [
    [17, 18, 24, 47, 99, 99, 99, 99],
    [18, 21, 26, 66, 99, 99, 99, 99],
    [24, 26, 56, 99, 99, 99, 99, 99],
    [47, 66, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
]

# Сетки атак для оценки на изображениях
IMAGE_VALUEMETRIC_GRID: Dict[str, List[float]] = {
    "brightness": [0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
    "contrast": [0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
    "hue": [-0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
    "gaussian_blur": [3, 5, 9, 13, 17],
}
IMAGE_GEOMETRIC_GRID: Dict[str, List[float]] = {
    "rotate": [5, 10, 30, 45, 90],
    "crop": [0.32, 0.45, 0.55, 0.63, 0.71, 0.77, 0.84, 0.89, 0.95, 1.0],
    "perspective": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
}
IMAGE_JPEG_QUALITIES: List[int] = [40, 50, 60, 70, 80, 90]
IMAGE_COMBINED_JPEG: List[int] = [40, 60, 80]

# Сетки атак для видео
VIDEO_VALUEMETRIC_GRID: Dict[str, List[float]] = {
    "brightness": [0.5, 1.5],
    "contrast": [0.5, 1.5],
    "saturation": [0.5, 1.5],
    "hue": [0.25],
    "gaussian_blur": [9],
}
VIDEO_GEOMETRIC_GRID: Dict[str, List[float]] = {
    "rotate": [10, 90],
    "crop": [0.55, 0.71],
    "perspective": [0.5],
}
VIDEO_JPEG_QUALITIES: List[int] = [40]
VIDEO_CODECS: List[str] = ["h264", "h264rgb", "h265"]
VIDEO_CODEC_CRFS: List[int] = [23, 30, 40, 50]

# Параметры комбинированной атаки
COMBINED_CROP = 0.71
COMBINED_BRIGHTNESS = 0.5

# Диапазоны случайных атак при обучении
TRAIN_ATTACK_RANGES: Dict[str, Tuple[float, float]] = {
    "brightness": (0.5, 1.5),
    "contrast": (0.5, 1.5),
    "saturation": (0.5, 1.5),
    "hue": (-0.1, 0.1),
    "gaussian_blur": (3, 7),
    "rotate": (-10.0, 10.0),
    "crop": (0.55, 1.0),
    "perspective": (0.0, 0.3),
    "resize": (0.5, 1.5),
    "jpeg": (40, 90),
}
# Мягкие диапазоны для первой четверти стадии 1
TRAIN_MILD_RANGES: Dict[str, Tuple[float, float]] = {
    "brightness": (0.9, 1.1),
    "contrast": (0.9, 1.1),
}

# Категории атак в порядке колонок итоговой таблицы
CATEGORY_ORDER: List[str] = [
    "identity",
    "valuemetric",
    "compression",
    "geometric",
    "combined",
]
