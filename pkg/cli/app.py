"""
Разбор аргументов командной строки и перевод исключений в коды выхода.

    sealkit [--seed N] [--config FILE] [--threads N] <команда> ...

Коды выхода: 0 — успех/водяной знак найден, 1 — не найден (detect),
2 — ошибка использования или конфига, 3 — ошибка данных, 4 — численный сбой.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from config.constants import DEFAULT_TAU, EXIT_DATA, EXIT_NUMERIC, EXIT_USAGE
from config.settings import settings
from core.exceptions import (
    AttackError,
    ConfigurationError,
    NumericError,
    SealKitError,
    ShapeError,
    TrainingError,
    ValidationError,
)
from core.logging import setup_logging
from cli import commands
from services.ablation_service import ABLATION_KINDS


logger = logging.getLogger(__name__)

SUITES = ("image", "video", "identity", "combined")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sealkit",
        description=(
            "Невидимые водяные знаки: обучение, встраивание, детекция и оценка устойчивости."
        ),
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="Seed (переопределяет seed из конфига)"
    )
    parser.add_argument("--config", type=Path, default=None, help="JSON-конфиг запуска (RunConfig)")
    parser.add_argument("--threads", type=int, default=None, help="Число потоков оценки")
    parser.add_argument("--log-level", default=None, help="Уровень логирования (DEBUG, INFO, …)")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Обучить модели по трёхстадийному расписанию")
    train.add_argument("--out", type=Path, required=True, help="Директория для чекпоинтов и лога")
    train.add_argument("--resume", type=Path, default=None, help="Продолжить с чекпоинта")
    train.add_argument("--max-steps", type=int, default=None, help="Остановиться после N шагов")
    train.set_defaults(handler=commands.cmd_train)

    embed = sub.add_parser("embed", help="Встроить сообщение в изображение")
    embed.add_argument("checkpoint", type=Path)
    embed.add_argument("image_in", type=Path)
    embed.add_argument("message_hex")
    embed.add_argument("image_out", type=Path)
    embed.add_argument(
        "--alpha", type=float, default=None, help="Масштаб водяного знака (по умолчанию α₁)"
    )
    embed.add_argument("--no-jnd", action="store_true", help="Не применять JND-карту")
    embed.set_defaults(handler=commands.cmd_embed)

    extract = sub.add_parser("extract", help="Извлечь сообщение из изображения")
    extract.add_argument("checkpoint", type=Path)
    extract.add_argument("image_in", type=Path)
    extract.set_defaults(handler=commands.cmd_extract)

    detect = sub.add_parser("detect", help="Проверить наличие сообщения (код 0 — найдено, 1 — нет)")
    detect.add_argument("checkpoint", type=Path)
    detect.add_argument("image_in", type=Path)
    detect.add_argument("message_hex")
    detect.add_argument("--tau", type=float, default=DEFAULT_TAU, help="Порог по −log10 p")
    detect.set_defaults(handler=commands.cmd_detect)

    evaluate = sub.add_parser("evaluate", help="Оценка устойчивости на датасете")
    evaluate.add_argument("checkpoint", type=Path)
    evaluate.add_argument("dataset_dir", type=Path)
    evaluate.add_argument("--suite", choices=SUITES, default=None)
    evaluate.add_argument("--out", type=Path, required=True, help="Путь к JSON-отчёту (CSV рядом)")
    evaluate.add_argument("--tau", type=float, default=None)
    evaluate.add_argument("--alpha", type=float, default=None)
    evaluate.set_defaults(handler=commands.cmd_evaluate)

    video = sub.add_parser("video", help="Оценка на видео с временным пулингом")
    video.add_argument("checkpoint", type=Path)
    video.add_argument("frames_dirs", type=Path, nargs="+", help="Директории с кадрами")
    video.add_argument("--k", type=int, default=4, help="Шаг временного пулинга")
    video.add_argument("--d", type=int, default=1, help="Уровень U-Net для пулинга")
    video.add_argument("--suite", choices=SUITES, default="video")
    video.add_argument("--out", type=Path, required=True)
    video.add_argument("--tau", type=float, default=None)
    video.add_argument("--alpha", type=float, default=None)
    video.set_defaults(handler=commands.cmd_video)

    ablate = sub.add_parser("ablate", help="Абляции (a, b, c, d)")
    ablate.add_argument("kind", choices=ABLATION_KINDS)
    ablate.add_argument("--out", type=Path, required=True, help="CSV-таблица результатов")
    ablate.add_argument("--seeds", type=int, nargs="*", default=None)
    ablate.set_defaults(handler=commands.cmd_ablate)

    null = sub.add_parser(
        "null-check", help="Эмпирическая доля ложных срабатываний на чистых изображениях"
    )
    null.add_argument("checkpoint", type=Path)
    null.add_argument("dataset_dir", type=Path)
    null.add_argument("--trials", type=int, default=1000, help="Случайных эталонов на изображение")
    null.add_argument("--tau", type=float, default=None)
    null.set_defaults(handler=commands.cmd_null_check)

    return parser


def exit_code_for(exc: SealKitError) -> int:
    """Код выхода по типу исключения."""
    if isinstance(exc, (ValidationError, ConfigurationError, ShapeError, AttackError)):
        return EXIT_USAGE
    if isinstance(exc, (NumericError, TrainingError)):
        return EXIT_NUMERIC
    return EXIT_DATA


def main(argv: Optional[List[str]] = None) -> int:
    """Точка входа; возвращает код выхода."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads должно быть ≥ 1")
        settings.threads = args.threads

    try:
        return args.handler(args)
    except SealKitError as exc:
        code = exit_code_for(exc)
        logger.error(f"{exc.message} {exc.details or ''}".strip())
        print(f"error: {exc.message}", file=sys.stderr)
        return code
