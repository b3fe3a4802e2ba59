"""
Обучение: шаг оптимизации на высоком разрешении и трёхстадийное расписание.

Стадия 1 — только L_msg при α = α₀ до насыщения точности по битам.
Стадия 2 — добавляется состязательный лосс, α отжигается по alpha_schedule.
Стадия 3 — дообучение при α = α₁.

Если стадия 1 насыщается раньше n_start (на шаге s), окно отжига
сдвигается в [s, s + (n_end − n_start)].
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import NumericError, TrainingError, ValidationError
from models import ModelBundle
from models.discriminator import discriminator_forward
from models.embedder import embedder_forward
from models.extractor import extractor_forward
from models.layers import cast_params, to_tensors
from ndgrad import AdamW, Graph, Tensor, ops, resample, warmup_cosine_lr
from repositories.checkpoint_repo import Checkpoint
from schemas.attack import AttackKind, AttackSpec
from schemas.training import TrainConfig, TrainRecord
from services.attack_service import apply_attack_tensor, sample_training_attack
from services.dataset_service import ImageDataset
from services.losses import (
    alpha_schedule,
    boost,
    discriminator_step_loss,
    embedder_adv_loss,
    message_loss,
    perceptual_mse,
)
from services.quality_service import jnd_map


logger = logging.getLogger(__name__)

STATUS_RUNNING = "running"
STATUS_DONE = "done"
STATUS_NOT_SATURATED = "stage1_not_saturated"

GENERATOR_NETWORKS = ("embedder", "extractor")

RecordHook = Callable[[TrainRecord], None]
StateHook = Callable[["TrainState"], None]


@dataclass
class TrainState:
    """
    Всё, что нужно для продолжения обучения с того же места.

    Инвариант: stage меняется только 1 → 2 → 3.
    """

    bundle: ModelBundle
    config: TrainConfig
    rng: np.random.Generator
    step: int = 0
    stage: int = 1
    stage2_start: Optional[int] = None
    saturated: bool = False
    status: str = STATUS_RUNNING
    opt_gen: AdamW = field(default_factory=AdamW)
    opt_disc: AdamW = field(default_factory=AdamW)
    recent_acc: Deque[float] = field(default_factory=deque)

    @classmethod
    def create(cls, bundle: ModelBundle, config: TrainConfig, seed: int) -> "TrainState":
        """Новое состояние; параметры приводятся к config.precision."""
        if str(bundle.dtype) != config.precision:
            bundle = ModelBundle(
                arch=bundle.arch,
                embedder=cast_params(bundle.embedder, config.precision),
                extractor=cast_params(bundle.extractor, config.precision),
                discriminator=cast_params(bundle.discriminator, config.precision),
            )
        return cls(
            bundle=bundle,
            config=config,
            rng=np.random.default_rng(seed),
            opt_gen=_make_optimizer(config),
            opt_disc=_make_optimizer(config),
            recent_acc=deque(maxlen=config.saturation_window),
        )

    # --- расписание ---------------------------------------------------------

    @property
    def window(self) -> Tuple[int, int]:
        """Окно отжига α: номинальное или сдвинутое ранним насыщением."""
        start = self.config.n_start if self.stage2_start is None else self.stage2_start
        return start, start + self.config.anneal_steps

    @property
    def alpha(self) -> float:
        if self.stage == 1:
            return self.config.alpha0
        if self.stage == 3:
            return self.config.alpha1
        start, _ = self.window
        return alpha_schedule(self.step - start + self.config.n_start, self.config)

    @property
    def adversarial_active(self) -> bool:
        if self.config.lambda_adv == 0.0:
            return False
        return self.stage > 1 or self.config.adv_from_start

    @property
    def final_step(self) -> int:
        return self.window[1] + self.config.stage3_steps

    @property
    def finished(self) -> bool:
        return self.step >= self.final_step

    def learning_rate(self) -> float:
        config = self.config
        return warmup_cosine_lr(self.step, config.lr, config.warmup_steps, config.total_steps)

    # --- чекпоинт -----------------------------------------------------------

    def summary(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "stage": self.stage,
            "alpha": self.alpha,
            "stage2_start": self.stage2_start,
            "saturated": self.saturated,
            "status": self.status,
            "recent_acc": list(self.recent_acc),
            "opt_gen_steps": self.opt_gen.step_count,
            "opt_disc_steps": self.opt_disc.step_count,
        }

    def to_checkpoint(self, run_config: Optional[Dict[str, Any]] = None) -> Checkpoint:
        arrays = self.opt_gen.state_arrays("gen")
        arrays.update(self.opt_disc.state_arrays("disc"))
        return Checkpoint(
            bundle=self.bundle,
            train_state=self.summary(),
            optimizer_arrays=arrays,
            rng_state=self.rng.bit_generator.state,
            run_config=run_config,
        )

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint, config: TrainConfig) -> "TrainState":
        """
        Восстановить состояние обучения.

        Raises:
            TrainingError: в чекпоинте нет состояния обучения или RNG.
        """
        summary = checkpoint.train_state
        if "step" not in summary or checkpoint.rng_state is None:
            raise TrainingError(
                "Чекпоинт не содержит состояния обучения",
                {"keys": sorted(summary)},
            )
        rng = np.random.default_rng()
        rng.bit_generator.state = checkpoint.rng_state
        opt_gen, opt_disc = _make_optimizer(config), _make_optimizer(config)
        opt_gen.load_state_arrays("gen", checkpoint.optimizer_arrays, summary["opt_gen_steps"])
        opt_disc.load_state_arrays("disc", checkpoint.optimizer_arrays, summary["opt_disc_steps"])
        return cls(
            bundle=checkpoint.bundle,
            config=config,
            rng=rng,
            step=summary["step"],
            stage=summary["stage"],
            stage2_start=summary.get("stage2_start"),
            saturated=summary.get("saturated", False),
            status=summary.get("status", STATUS_RUNNING),
            opt_gen=opt_gen,
            opt_disc=opt_disc,
            recent_acc=deque(summary.get("recent_acc", []), maxlen=config.saturation_window),
        )


def _make_optimizer(config: TrainConfig) -> AdamW:
    return AdamW(betas=(config.adam_beta1, config.adam_beta2), weight_decay=config.weight_decay)


# --- один шаг ----------------------------------------------------------------


@dataclass
class _StepPlan:
    """Вся случайность шага, выбранная заранее."""

    images: List[np.ndarray]
    jnd: List[np.ndarray]
    lows: np.ndarray
    messages: np.ndarray
    attacks: List[AttackSpec]


def _plan_step(
    state: TrainState, batch_images: Sequence[np.ndarray], rng: np.random.Generator
) -> _StepPlan:
    config = state.config
    dtype = state.bundle.dtype
    res = state.bundle.arch.model_res
    images, jnds, lows = [], [], []
    for image in batch_images:
        h, w = (int(v) for v in rng.integers(config.s_min, config.s_max + 1, size=2))
        x = resample.bilinear_resize(Tensor(np.asarray(image, dtype=dtype)[None]), h, w).data
        x = np.clip(x, 0.0, 1.0)
        images.append(x)
        jnds.append(jnd_map(x[0]).astype(dtype) if config.use_jnd else np.ones((h, w), dtype=dtype))
        lows.append(resample.bilinear_resize(Tensor(x), res, res).data[0])
    messages = rng.integers(0, 2, size=(len(images), state.bundle.arch.n_bits)).astype(dtype)

    mild = state.stage == 1 and state.step < config.n_start // 4
    attacks = [
        sample_training_attack(rng, mild=mild)
        if config.use_attacks
        else AttackSpec(kind=AttackKind.IDENTITY)
        for _ in images
    ]
    return _StepPlan(
        images=images, jnd=jnds, lows=np.stack(lows), messages=messages, attacks=attacks
    )


def _flat(bundle: ModelBundle, networks: Sequence[str]) -> Dict[str, np.ndarray]:
    """Плоский словарь "сеть/имя" → массив (те же объекты, обновляются на месте)."""
    return {
        f"{net}/{name}": array for net in networks for name, array in bundle.network(net).items()
    }


def _split(bound: Dict[str, Tensor], net: str) -> Dict[str, Tensor]:
    prefix = f"{net}/"
    return {name[len(prefix) :]: t for name, t in bound.items() if name.startswith(prefix)}


def _check_finite(term: str, value: float, step: int) -> None:
    if not np.isfinite(value):
        raise NumericError(f"Нечисловое значение лосса {term}", {"term": term, "step": step})


def train_step(
    state: TrainState,
    batch_images: Sequence[np.ndarray],
    rng: Optional[np.random.Generator] = None,
) -> Tuple[TrainState, TrainRecord]:
    """
    Один шаг: обновление эмбеддера и экстрактора, затем (если включён
    состязательный лосс) шаг дискриминатора на отсоединённых x̂_w.

    Raises:
        ValidationError: пустой батч.
        NumericError: нечисловой лосс (с именем члена и номером шага).
    """
    if not batch_images:
        raise ValidationError("Пустой батч", {"step": state.step})
    rng = rng or state.rng
    config = state.config
    arch = state.bundle.arch
    res = arch.model_res
    alpha = state.alpha
    adversarial = state.adversarial_active
    plan = _plan_step(state, batch_images, rng)
    disc_params = to_tensors(state.bundle.discriminator)
    fakes: List[np.ndarray] = []
    terms: Dict[str, Tensor] = {}

    def objective(**bound: Tensor) -> Tensor:
        fakes.clear()
        watermarks = embedder_forward(
            _split(bound, "embedder"), Tensor(plan.lows), Tensor(plan.messages), arch
        )
        extracted_inputs, adv_terms, perc_terms = [], [], []
        for i, (x, jnd) in enumerate(zip(plan.images, plan.jnd)):
            h, w = x.shape[2:]
            x_t = Tensor(x)
            up = resample.bilinear_resize(watermarks[i : i + 1], h, w)
            x_w = ops.clamp(x_t + up * (jnd[None, None] * alpha), 0.0, 1.0)
            if adversarial:
                boosted = boost(x_t, x_w, config.beta)
                fakes.append(boosted.data.copy())
                logits = discriminator_forward(disc_params, boosted, arch)
                adv_terms.append(embedder_adv_loss(logits, config.lambda_adv))
            if config.lambda_perc > 0.0:
                perc_terms.append(perceptual_mse(x_t, x_w))
            attacked = apply_attack_tensor(plan.attacks[i], x_w, rng)
            extracted_inputs.append(resample.bilinear_resize(attacked, res, res))

        stacked = ops.concat(extracted_inputs, axis=0)
        soft = extractor_forward(_split(bound, "extractor"), stacked, arch)
        terms["soft"] = soft
        terms["msg"] = message_loss(soft, plan.messages)
        total = terms["msg"] * config.lambda_msg
        if adv_terms:
            terms["adv"] = _average(adv_terms)
            total = total + terms["adv"]
        if perc_terms:
            terms["perc"] = _average(perc_terms)
            total = total + terms["perc"] * config.lambda_perc
        terms["total"] = total
        return total

    params = _flat(state.bundle, GENERATOR_NETWORKS)
    graph = Graph(objective, leaves=list(params))
    graph.forward(params)
    for name in ("msg", "adv", "perc", "total"):
        if name in terms:
            _check_finite(name, terms[name].item(), state.step)

    lr = state.learning_rate()
    state.opt_gen.step(params, graph.backward(), lr)

    loss_disc = None
    if adversarial:
        loss_disc = _discriminator_update(state, plan.images, fakes, lr)

    soft = terms["soft"].data
    bit_acc = float(np.mean((soft >= 0.5) == (plan.messages >= 0.5)))
    record = TrainRecord(
        kind="step",
        step=state.step,
        stage=state.stage,
        alpha=alpha,
        lr=lr,
        bit_acc=bit_acc,
        loss_total=terms["total"].item(),
        loss_msg=terms["msg"].item(),
        loss_adv=terms["adv"].item() if "adv" in terms else None,
        loss_perc=terms["perc"].item() if "perc" in terms else None,
        loss_disc=loss_disc,
    )
    state.step += 1
    return state, record


def _average(values: List[Tensor]) -> Tensor:
    total = values[0]
    for value in values[1:]:
        total = total + value
    return total * (1.0 / len(values))


def _discriminator_update(
    state: TrainState,
    reals: List[np.ndarray],
    fakes: List[np.ndarray],
    lr: float,
) -> float:
    """Hinge-шаг дискриминатора; эмбеддер и экстрактор не трогаются."""
    arch = state.bundle.arch

    def objective(**bound: Tensor) -> Tensor:
        p = _split(bound, "discriminator")
        losses = [
            discriminator_step_loss(
                discriminator_forward(p, Tensor(real), arch),
                discriminator_forward(p, Tensor(fake), arch),
            )
            for real, fake in zip(reals, fakes)
        ]
        return _average(losses)

    params = _flat(state.bundle, ("discriminator",))
    graph = Graph(objective, leaves=list(params))
    loss = graph.forward(params).item()
    _check_finite("disc", loss, state.step)
    state.opt_disc.step(params, graph.backward(), lr)
    return loss


# --- стадии --------------------------------------------------------------------


def _stage_record(state: TrainState, status: Optional[str] = None) -> TrainRecord:
    start, end = state.window
    return TrainRecord(
        kind="stage",
        step=state.step,
        stage=state.stage,
        alpha=state.alpha,
        n_start=start,
        n_end=end,
        status=status or state.status,
    )


def advance_stage(state: TrainState, bit_acc: float) -> Optional[TrainRecord]:
    """
    Обновить окно точности и при необходимости перейти на следующую стадию.

    Returns:
        Запись о смене стадии или None.

    Raises:
        TrainingError: стадия 1 не насытилась за бюджет при require_saturation.
    """
    config = state.config
    state.recent_acc.append(bit_acc)
    if state.stage == 1:
        window_full = len(state.recent_acc) == config.saturation_window
        if window_full and float(np.mean(state.recent_acc)) >= config.saturation_threshold:
            state.saturated = True
            state.stage2_start = min(state.step, config.n_start)
        elif state.step >= config.n_start:
            state.stage2_start = config.n_start
            state.status = STATUS_NOT_SATURATED
            logger.warning(
                f"Стадия 1 не насытилась за {config.n_start} шагов "
                f"(средняя точность {float(np.mean(state.recent_acc)):.3f})"
            )
            if config.require_saturation:
                raise TrainingError(
                    "Стадия 1 не достигла насыщения точности по битам",
                    {"step": state.step, "threshold": config.saturation_threshold},
                )
        else:
            return None
        state.stage = 2
        logger.info(f"Стадия 2 с шага {state.step}, окно отжига {state.window}")
        return _stage_record(state)

    if state.stage == 2 and state.step >= state.window[1]:
        state.stage = 3
        logger.info(f"Стадия 3 с шага {state.step}, α = {state.alpha}")
        return _stage_record(state)
    return None


def run_stages(
    state: TrainState,
    dataset: ImageDataset,
    on_record: Optional[RecordHook] = None,
    on_checkpoint: Optional[StateHook] = None,
    max_steps: Optional[int] = None,
) -> Tuple[ModelBundle, List[TrainRecord]]:
    """
    Полный цикл обучения до конца стадии 3 (или до max_steps шагов).

    Args:
        state: новое или восстановленное из чекпоинта состояние.
        on_record: вызывается для каждой записи лога (шаги, стадии, итог).
        on_checkpoint: вызывается каждые checkpoint_every шагов.
        max_steps: ограничение числа шагов в этом вызове.

    Raises:
        DataError: пустой датасет.
        TrainingError: стадия 1 не насытилась при require_saturation.
        NumericError: нечисловой лосс.
    """
    config = state.config
    records: List[TrainRecord] = []

    def emit(record: TrainRecord) -> None:
        records.append(record)
        if on_record is not None:
            on_record(record)

    if state.step == 0:
        emit(_stage_record(state))

    done = 0
    while not state.finished and (max_steps is None or done < max_steps):
        batch = dataset.sample_batch(state.rng, config.batch_size)
        try:
            _, record = train_step(state, batch)
        except NumericError:
            state.status = "numeric_error"
            raise
        done += 1
        if state.step % config.log_every == 0 or state.step == 1:
            emit(record)
        try:
            stage_record = advance_stage(state, record.bit_acc or 0.0)
        except TrainingError:
            emit(_stage_record(state))
            raise
        if stage_record is not None:
            emit(stage_record)
        if on_checkpoint is not None and state.step % config.checkpoint_every == 0:
            on_checkpoint(state)

    if state.finished:
        if state.status == STATUS_RUNNING:
            state.status = STATUS_DONE
        emit(
            TrainRecord(
                kind="summary",
                step=state.step,
                stage=state.stage,
                alpha=state.alpha,
                bit_acc=float(np.mean(state.recent_acc)) if state.recent_acc else None,
                n_start=state.window[0],
                n_end=state.window[1],
                status=state.status,
            )
        )
        logger.info(f"Обучение завершено: шаг {state.step}, статус {state.status}")
    return state.bundle, records
