"""
Оценка на видео с временным пулингом водяного знака.

Сообщение извлекается из каждого кадра, мягкие сообщения усредняются по
кадрам и только потом бинаризуются. Ускорение — отношение времени
прохода эмбеддера при k = 1 к времени при заданном k; масштабирование,
JND и наложение общие для обоих путей и в замер не входят.
"""

from __future__ import annotations

import logging
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config.constants import DEFAULT_TAU
from core.exceptions import ExternalCodecError, ValidationError
from models import ModelBundle, temporal_pooled_embed
from schemas.attack import AttackSuite
from schemas.report import EvalReport, RunMetadata
from services.attack_service import attack_sequence
from services.codec_hook import ExternalCodec
from services.detection_service import detect
from services.evaluation_service import ItemScores, assemble_report, reference_message, suite_id
from services.quality_service import psnr, ssim
from services.watermark_service import (
    average_soft,
    compose_sequence,
    downscale_sequence,
    extract_sequence,
)


logger = logging.getLogger(__name__)


def _timed(fn, *args, **kwargs) -> Tuple[np.ndarray, float]:
    start = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, time.perf_counter() - start


def run_video_eval(
    bundle: ModelBundle,
    sequences: Sequence[np.ndarray],
    k: int,
    d: int,
    suites: Sequence[AttackSuite],
    tau: float = DEFAULT_TAU,
    alpha: Optional[float] = None,
    seed: int = 0,
    codec: Optional[ExternalCodec] = None,
) -> EvalReport:
    """
    Args:
        sequences: видео (T, 3, H, W), по одному на директорию кадров.
        k: шаг временного пулинга; d — уровень U-Net, где он применяется.

    Raises:
        ValidationError: нет последовательностей или пустая последовательность.
    """
    if not sequences:
        raise ValidationError("Нет видеопоследовательностей для оценки")
    alpha = 0.2 if alpha is None else alpha
    message = reference_message(bundle.arch.n_bits, seed)
    specs = [spec for suite in suites for spec in suite.specs]
    codec = codec or ExternalCodec()
    codec_ready = codec.available()

    items: List[ItemScores] = []
    pooled_time = baseline_time = 0.0
    for frames in sequences:
        if len(frames) == 0:
            raise ValidationError("Пустая видеопоследовательность")
        low = downscale_sequence(bundle, frames)
        watermarks, elapsed = _timed(temporal_pooled_embed, bundle, low, message, k, d)
        pooled_time += elapsed
        if k == 1:
            baseline_time += elapsed
        else:
            _, elapsed = _timed(temporal_pooled_embed, bundle, low, message, 1, d)
            baseline_time += elapsed
        watermarked = compose_sequence(frames, watermarks, alpha)

        item = ItemScores(
            psnr=float(np.mean([psnr(a, b) for a, b in zip(frames, watermarked)])),
            ssim=float(np.mean([ssim(a, b) for a, b in zip(frames, watermarked)])),
        )
        for spec in specs:
            if spec.is_external and not codec_ready:
                item.skipped[spec.attack_id] = "external encoder is not configured"
                continue
            try:
                attacked = attack_sequence(spec, watermarked, codec=codec)
            except ExternalCodecError as exc:
                logger.warning(f"Атака {spec.attack_id} пропущена: {exc.message}")
                item.skipped[spec.attack_id] = exc.message
                continue
            report = detect(average_soft(extract_sequence(bundle, attacked)), message, tau)
            item.scores[spec.attack_id] = (report.bit_accuracy, report.neg_log10_p, report.detected)
        items.append(item)

    metadata = RunMetadata(
        model_hash=bundle.model_hash(),
        seed=seed,
        suite_id=suite_id(suites),
        tau=tau,
        alpha=alpha,
        message_hex=message.to_hex() if message.n_bits % 4 == 0 else None,
        temporal_k=k,
        temporal_d=d,
    )
    report = assemble_report(suites, items, metadata)
    report.speedup = baseline_time / pooled_time if pooled_time > 0 else None
    logger.info(
        f"Видео: {len(sequences)} последовательностей, k={k}, d={d}, ускорение {report.speedup}"
    )
    return report
