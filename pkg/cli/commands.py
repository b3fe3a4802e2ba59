"""
Реализация подкоманд. Каждая функция принимает разобранные аргументы и
возвращает код выхода; исключения переводит в коды cli.app.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from config.constants import EXIT_NOT_DETECTED, EXIT_OK
from config.settings import settings
from core.exceptions import ConfigurationError, DatabaseError, DataError, ValidationError
from models import ModelBundle
from repositories.checkpoint_repo import Checkpoint, CheckpointRepository
from repositories.runs_repo import RunsRepository
from repositories.training_log_repo import TrainingLogRepository
from schemas.model import BitMessage
from schemas.training import RunConfig
from services.ablation_service import run_ablation
from services.attack_service import build_suites
from services.dataset_service import DatasetService, ImageDataset
from services.detection_service import detect, null_check
from services.evaluation_service import run_eval
from services.report_service import ReportService
from services.training_service import TrainState, run_stages
from services.video_service import run_video_eval
from services.watermark_service import embed_full_res, extract_full_res


logger = logging.getLogger(__name__)

LOG_FILE = "training_log.jsonl"
FINAL_CHECKPOINT = "final.ckpt"
CURVES_FILE = "training_curves.png"


# --- общие помощники ------------------------------------------------------------


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """
    RunConfig из --config (или значения по умолчанию); --seed переопределяет seed.

    Raises:
        ConfigurationError: файла нет или он не проходит строгий разбор.
    """
    path: Optional[Path] = args.config
    if path is None:
        config = RunConfig()
    else:
        try:
            config = RunConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigurationError(
                f"Не удалось прочитать конфиг: {path}", {"path": str(path)}
            ) from exc
        except PydanticValidationError as exc:
            raise ConfigurationError(
                f"Ошибка в конфиге {path}: {exc}", {"path": str(path)}
            ) from exc
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    return config


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(config.model_dump_json().encode("utf-8")).hexdigest()[:16]


def parse_message(text: str, n_bits: int) -> BitMessage:
    """
    Raises:
        ValidationError: неверные символы или длина (код выхода 2).
    """
    try:
        return BitMessage.from_hex(text, n_bits)
    except ValueError as exc:
        raise ValidationError(str(exc), {"message_hex": text, "n_bits": n_bits}) from exc


def load_checkpoint(path: Path) -> Checkpoint:
    return CheckpointRepository().load(path)


def checkpoint_alpha(checkpoint: Checkpoint, override: Optional[float]) -> float:
    """α для инференса: явный флаг, иначе α₁ из конфига чекпоинта."""
    if override is not None:
        return override
    train = (checkpoint.run_config or {}).get("train", {})
    return float(train.get("alpha1", 0.2))


def load_training_dataset(config: RunConfig, service: DatasetService) -> ImageDataset:
    """
    Директория из data.path или синтетический набор.

    Raises:
        DataError: директории нет или она пуста.
    """
    if config.data.path is not None:
        return service.load_directory(config.data.path)
    if config.data.synthetic_images == 0:
        raise DataError("Не задан датасет: data.path пуст и synthetic_images = 0")
    return service.synthetic(config.data.synthetic_images, config.data.synthetic_size, config.seed)


def _tracked(command: str, config: RunConfig, body: Callable[[], Dict[str, Any]]) -> Dict[str, Any]:
    """Выполнить body с записью в историю запусков (ошибки истории не фатальны)."""
    repo: Optional[RunsRepository] = None
    run_id = None
    if settings.record_history:
        try:
            repo = RunsRepository()
            repo.create_table()
            run_id = repo.start_run(command, config.seed, config_hash(config))
        except DatabaseError:
            logger.warning("История запусков недоступна, продолжаем без неё")
            repo = None

    status = "failed"
    summary: Dict[str, Any] = {}
    try:
        summary = body()
        status = summary.get("status", "success")
        return summary
    finally:
        if repo is not None and run_id is not None:
            try:
                repo.finish_run(run_id, status, summary)
            except DatabaseError:
                logger.warning(f"Не удалось записать итог запуска {run_id}")


# --- подкоманды -------------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = load_training_dataset(config, DatasetService())
    ckpt_repo = CheckpointRepository()
    log_repo = TrainingLogRepository(out_dir / LOG_FILE)
    run_config = json.loads(config.model_dump_json())

    if args.resume:
        state = TrainState.from_checkpoint(ckpt_repo.load(args.resume), config.train)
        log_repo.truncate_after(state.step)
        logger.info(f"Продолжение обучения с шага {state.step} (стадия {state.stage})")
    else:
        bundle = ModelBundle.initialize(config.arch, config.seed, dtype=config.train.precision)
        state = TrainState.create(bundle, config.train, config.seed)
        log_repo.reset()

    def save_periodic(current: TrainState) -> None:
        ckpt_repo.save(out_dir / f"step_{current.step:06d}.ckpt", current.to_checkpoint(run_config))

    def body() -> Dict[str, Any]:
        try:
            run_stages(
                state,
                dataset,
                on_record=log_repo.append,
                on_checkpoint=save_periodic,
                max_steps=args.max_steps,
            )
        finally:
            ckpt_repo.save(out_dir / FINAL_CHECKPOINT, state.to_checkpoint(run_config))
            ReportService().plot_training_curves(log_repo.read(), out_dir / CURVES_FILE)
        return {"status": state.status, "step": state.step, "stage": state.stage}

    summary = _tracked("train", config, body)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_embed(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    bundle = checkpoint.bundle
    message = parse_message(args.message_hex, bundle.arch.n_bits)
    service = DatasetService()
    image = service.load_image(args.image_in)
    alpha = checkpoint_alpha(checkpoint, args.alpha)
    watermarked = embed_full_res(bundle, image, message, alpha, use_jnd=not args.no_jnd)
    service.save_image(args.image_out, watermarked)
    logger.info(f"Водяной знак встроен: {args.image_out}")
    return EXIT_OK


def cmd_extract(args: argparse.Namespace) -> int:
    bundle = load_checkpoint(args.checkpoint).bundle
    soft = extract_full_res(bundle, DatasetService().load_image(args.image_in))
    bits = BitMessage.from_array(soft >= 0.5)
    payload = {
        "bits": "".join(str(b) for b in bits.bits),
        "hex": bits.to_hex() if bits.n_bits % 4 == 0 else None,
        "soft": [round(float(v), 6) for v in soft],
    }
    print(json.dumps(payload))
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    bundle = load_checkpoint(args.checkpoint).bundle
    message = parse_message(args.message_hex, bundle.arch.n_bits)
    soft = extract_full_res(bundle, DatasetService().load_image(args.image_in))
    report = detect(soft, message, args.tau)
    print(report.model_dump_json())
    return EXIT_OK if report.detected else EXIT_NOT_DETECTED


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    checkpoint = load_checkpoint(args.checkpoint)
    dataset = DatasetService().load_directory(args.dataset_dir, limit=config.eval.max_images)
    suites = build_suites(args.suite or config.eval.suite)
    tau = config.eval.tau if args.tau is None else args.tau
    reports = ReportService()

    def body() -> Dict[str, Any]:
        report = run_eval(
            checkpoint.bundle,
            dataset,
            suites,
            tau=tau,
            alpha=checkpoint_alpha(checkpoint, args.alpha),
            seed=config.seed,
            threads=args.threads,
        )
        reports.write_eval(report, args.out)
        print(reports.category_table(report))
        return {"status": "success", "categories": report.category_aggregates}

    _tracked("evaluate", config, body)
    return EXIT_OK


def cmd_video(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    checkpoint = load_checkpoint(args.checkpoint)
    service = DatasetService()
    sequences = [service.load_frames(directory) for directory in args.frames_dirs]
    reports = ReportService()

    def body() -> Dict[str, Any]:
        report = run_video_eval(
            checkpoint.bundle,
            sequences,
            k=args.k,
            d=args.d,
            suites=build_suites(args.suite),
            tau=config.eval.tau if args.tau is None else args.tau,
            alpha=checkpoint_alpha(checkpoint, args.alpha),
            seed=config.seed,
        )
        reports.write_eval(report, args.out)
        print(reports.category_table(report))
        return {"status": "success", "speedup": report.speedup}

    _tracked("video", config, body)
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    dataset = load_training_dataset(config, DatasetService())
    seeds = args.seeds or [config.seed]

    def body() -> Dict[str, Any]:
        table = run_ablation(args.kind, config, dataset, seeds=seeds)
        ReportService().write_ablation(table, args.out)
        print(table.to_string(index=False))
        return {"status": "success", "rows": len(table)}

    _tracked("ablate", config, body)
    return EXIT_OK


def cmd_null_check(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    bundle = load_checkpoint(args.checkpoint).bundle
    dataset = DatasetService().load_directory(args.dataset_dir, limit=config.eval.max_images)
    soft = np.stack([extract_full_res(bundle, image) for image in dataset.images])
    tau = config.eval.tau if args.tau is None else args.tau
    result = null_check(soft, args.trials, np.random.default_rng(config.seed), tau)
    print(
        json.dumps(
            {
                "n_trials": result.n_trials,
                "false_positives": result.false_positives,
                "empirical_fpr": result.empirical_fpr,
                "bound": result.bound,
            }
        )
    )
    return EXIT_OK
