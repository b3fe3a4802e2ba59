"""
Абляции: обучение нескольких вариантов конфига и сравнение по категориям атак.

Виды:
    a — MSE-лосс (λ_perc 0.1 и 1.0), без дискриминатора, без JND;
    b — коэффициент бустинга β ∈ {0.5, 1, 2.5};
    c — без масштабирования водяного знака, без задержки дискриминатора;
    d — обучение на фиксированном низком разрешении против высокого.
"""

from __future__ import annotations

import logging
from typing import Dict, List, Optional, Sequence

import pandas as pd

from config.constants import CATEGORY_ORDER
from core.exceptions import TrainingError, ValidationError
from models import ModelBundle
from schemas.attack import AttackSuite
from schemas.report import AblationRow
from schemas.training import RunConfig, TrainConfig
from services.attack_service import build_suites
from services.dataset_service import ImageDataset
from services.evaluation_service import run_eval
from services.training_service import TrainState, run_stages


logger = logging.getLogger(__name__)

ABLATION_KINDS = ("a", "b", "c", "d")
COLLAPSE_CENTER = 0.5
COLLAPSE_TOLERANCE = 0.05


def ablation_variants(kind: str, train: TrainConfig, model_res: int) -> Dict[str, TrainConfig]:
    """
    Варианты TrainConfig для вида абляции (первый — базовый, где он есть).

    Raises:
        ValidationError: неизвестный вид.
    """
    def variant(**update) -> TrainConfig:
        return train.model_copy(update={"require_saturation": False, **update})

    if kind == "a":
        return {
            "baseline": variant(),
            "mse_0.1": variant(lambda_perc=0.1),
            "mse_1.0": variant(lambda_perc=1.0),
            "no_discriminator": variant(lambda_adv=0.0),
            "no_jnd": variant(use_jnd=False),
        }
    if kind == "b":
        return {f"beta_{beta:g}": variant(beta=beta) for beta in (0.5, 1.0, 2.5)}
    if kind == "c":
        return {
            "baseline": variant(),
            "no_scaling": variant(alpha0=train.alpha1),
            "no_disc_delay": variant(alpha0=train.alpha1, adv_from_start=True),
        }
    if kind == "d":
        return {
            "high_res": variant(),
            "fixed_res": variant(s_min=model_res, s_max=model_res),
        }
    raise ValidationError(f"Неизвестный вид абляции: {kind}", {"kinds": list(ABLATION_KINDS)})


def is_collapsed(identity_accuracy: Optional[float]) -> bool:
    """Коллапс — точность без атак осталась около 0.5."""
    if identity_accuracy is None:
        return False
    return abs(identity_accuracy - COLLAPSE_CENTER) <= COLLAPSE_TOLERANCE


def run_ablation(
    kind: str,
    config: RunConfig,
    dataset: ImageDataset,
    seeds: Sequence[int] = (0,),
    eval_dataset: Optional[ImageDataset] = None,
    suites: Optional[Sequence[AttackSuite]] = None,
) -> pd.DataFrame:
    """
    Обучить все варианты на каждом seed и оценить при α₁.

    Returns:
        DataFrame со столбцами AblationRow.
    """
    variants = ablation_variants(kind, config.train, config.arch.model_res)
    suites = list(suites) if suites is not None else build_suites("image")
    eval_dataset = eval_dataset or dataset.head(config.eval.max_images)
    rows: List[AblationRow] = []

    for name, train_config in variants.items():
        for seed in seeds:
            logger.info(f"Абляция {kind}/{name}, seed={seed}")
            bundle = ModelBundle.initialize(config.arch, seed, dtype=train_config.precision)
            state = TrainState.create(bundle, train_config, seed)
            try:
                run_stages(state, dataset)
            except TrainingError as exc:
                logger.warning(f"Вариант {name} прерван: {exc.message}")
                rows.append(AblationRow(kind=kind, variant=name, seed=seed, status="failed"))
                continue

            report = run_eval(
                state.bundle,
                eval_dataset,
                suites,
                tau=config.eval.tau,
                alpha=train_config.alpha1,
                seed=seed,
            )
            aggregates = report.category_aggregates
            rows.append(
                AblationRow(
                    kind=kind,
                    variant=name,
                    seed=seed,
                    psnr=report.quality.psnr if report.quality else None,
                    collapsed=is_collapsed(aggregates.get("identity")),
                    status=state.status,
                    **{category: aggregates.get(category) for category in CATEGORY_ORDER},
                )
            )

    return pd.DataFrame([row.model_dump() for row in rows])
