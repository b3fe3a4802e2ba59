"""
Оценка устойчивости и незаметности на наборе изображений.

Для каждого изображения: встраивание фиксированного сообщения по пути
инференса на исходном разрешении, затем каждая атака набора, извлечение и
детекция. Изображения обрабатываются параллельно (bundle не меняется),
отчёт собирается в одном потоке в порядке изображений.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from config.constants import CATEGORY_ORDER, DEFAULT_TAU
from config.settings import settings
from core.exceptions import ExternalCodecError, ValidationError
from models import ModelBundle
from schemas.attack import AttackSpec, AttackSuite
from schemas.model import BitMessage
from schemas.report import AttackRow, EvalReport, QualityBlock, RunMetadata
from services.attack_service import apply_attack
from services.codec_hook import ExternalCodec
from services.dataset_service import ImageDataset
from services.detection_service import detect
from services.quality_service import psnr, ssim
from services.watermark_service import embed_full_res, extract_full_res


logger = logging.getLogger(__name__)


@dataclass
class ItemScores:
    """Результаты одного изображения (или одной видеопоследовательности)."""

    scores: Dict[str, tuple[float, float, bool]] = field(default_factory=dict)
    skipped: Dict[str, str] = field(default_factory=dict)
    psnr: float = 0.0
    ssim: float = 0.0


def reference_message(n_bits: int, seed: int) -> BitMessage:
    """Эталонное сообщение запуска: одно на все изображения, задаётся seed."""
    return BitMessage.random(n_bits, np.random.default_rng(seed))


def suite_id(suites: Sequence[AttackSuite]) -> str:
    return "+".join(f"{s.category.value}:{len(s.specs)}" for s in suites)


def _all_specs(suites: Sequence[AttackSuite]) -> List[AttackSpec]:
    return [spec for suite in suites for spec in suite.specs]


def _evaluate_image(
    bundle: ModelBundle,
    image: np.ndarray,
    message: BitMessage,
    specs: Sequence[AttackSpec],
    alpha: float,
    tau: float,
    codec: ExternalCodec,
) -> ItemScores:
    res = bundle.arch.model_res
    if min(image.shape[1:]) < res:
        raise ValidationError(
            "Разрешение изображения меньше разрешения модели",
            {"shape": image.shape, "model_res": res},
        )
    watermarked = embed_full_res(bundle, image, message, alpha)
    item = ItemScores(psnr=psnr(image, watermarked), ssim=ssim(image, watermarked))
    codec_ready = codec.available()
    for spec in specs:
        if spec.is_external and not codec_ready:
            item.skipped[spec.attack_id] = "external encoder is not configured"
            continue
        try:
            attacked = apply_attack(spec, watermarked, codec=codec)
        except ExternalCodecError as exc:
            logger.warning(f"Атака {spec.attack_id} пропущена: {exc.message}")
            item.skipped[spec.attack_id] = exc.message
            continue
        report = detect(extract_full_res(bundle, attacked), message, tau)
        item.scores[spec.attack_id] = (report.bit_accuracy, report.neg_log10_p, report.detected)
    return item


def _mean(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def assemble_report(
    suites: Sequence[AttackSuite],
    items: Sequence[ItemScores],
    metadata: RunMetadata,
) -> EvalReport:
    """
    Свести результаты по изображениям в отчёт.

    Атака, пропущенная хотя бы на одном изображении, помечается skipped
    целиком и в агрегаты категорий не входит.
    """
    rows: List[AttackRow] = []
    category_acc: Dict[str, Optional[float]] = {}
    category_nlp: Dict[str, Optional[float]] = {}
    for suite in suites:
        accs, nlps = [], []
        for spec in suite.specs:
            key = spec.attack_id
            reasons = [item.skipped[key] for item in items if key in item.skipped]
            if reasons:
                rows.append(
                    AttackRow(
                        attack_id=key,
                        category=suite.category.value,
                        skipped=True,
                        skip_reason=reasons[0],
                    )
                )
                continue
            scores = [item.scores[key] for item in items]
            row = AttackRow(
                attack_id=key,
                category=suite.category.value,
                bit_accuracy=float(np.mean([s[0] for s in scores])),
                neg_log10_p=float(np.mean([s[1] for s in scores])),
                detected_rate=float(np.mean([s[2] for s in scores])),
                n_images=len(scores),
            )
            rows.append(row)
            accs.append(row.bit_accuracy)
            nlps.append(row.neg_log10_p)
        category_acc[suite.category.value] = _mean(accs)
        category_nlp[suite.category.value] = _mean(nlps)

    for name in CATEGORY_ORDER:
        category_acc.setdefault(name, None)
        category_nlp.setdefault(name, None)
    quality = QualityBlock(
        psnr=float(np.mean([item.psnr for item in items])),
        ssim=float(np.mean([item.ssim for item in items])),
        n_images=len(items),
    )
    return EvalReport(
        rows=rows,
        category_aggregates={name: category_acc[name] for name in CATEGORY_ORDER},
        category_neg_log10_p={name: category_nlp[name] for name in CATEGORY_ORDER},
        quality=quality,
        metadata=metadata,
    )


def run_eval(
    bundle: ModelBundle,
    dataset: ImageDataset,
    suites: Sequence[AttackSuite],
    tau: float = DEFAULT_TAU,
    alpha: Optional[float] = None,
    seed: int = 0,
    threads: Optional[int] = None,
    codec: Optional[ExternalCodec] = None,
) -> EvalReport:
    """
    Оценка bundle на датасете по наборам атак.

    Args:
        alpha: масштаб водяного знака; по умолчанию α₁ = 0.2.
        threads: число потоков; по умолчанию settings.threads.

    Raises:
        ValidationError: пустой датасет или изображение меньше model_res.
    """
    if len(dataset) == 0:
        raise ValidationError("Пустой датасет для оценки", {"source": dataset.source})
    alpha = 0.2 if alpha is None else alpha
    message = reference_message(bundle.arch.n_bits, seed)
    specs = _all_specs(suites)
    codec = codec or ExternalCodec()
    workers = threads or settings.threads

    logger.info(f"Оценка: {len(dataset)} изображений × {len(specs)} атак, потоков {workers}")

    def job(image: np.ndarray) -> ItemScores:
        return _evaluate_image(bundle, image, message, specs, alpha, tau, codec)

    if workers == 1:
        items = [job(image) for image in dataset.images]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            items = list(pool.map(job, dataset.images))

    metadata = RunMetadata(
        model_hash=bundle.model_hash(),
        seed=seed,
        suite_id=suite_id(suites),
        tau=tau,
        alpha=alpha,
        message_hex=message.to_hex() if message.n_bits % 4 == 0 else None,
    )
    report = assemble_report(suites, items, metadata)
    logger.info(f"Агрегаты по категориям: {report.category_aggregates}")
    return report
