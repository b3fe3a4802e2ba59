"""
Unit-тесты для репозиториев.

Чекпоинты (формат и проверки целостности), JSONL-лог обучения и
SQLite-история запусков.
"""

import struct
from pathlib import Path

import numpy as np
import pytest

from core.exceptions import CheckpointError, DatabaseError, DataError
from models import ModelBundle
from repositories.checkpoint_repo import Checkpoint, CheckpointRepository
from repositories.runs_repo import RunsRepository
from repositories.training_log_repo import TrainingLogRepository
from schemas.training import TrainRecord


@pytest.fixture
def checkpoint(tiny_bundle: ModelBundle) -> Checkpoint:
    return Checkpoint(
        bundle=tiny_bundle,
        train_state={"step": 12, "stage": 2, "recent_acc": [0.5, 0.75]},
        optimizer_arrays={"gen.m.embedder/head.w": np.arange(6.0).reshape(2, 3)},
        rng_state=np.random.default_rng(3).bit_generator.state,
        run_config={"seed": 3},
    )


@pytest.fixture
def saved(checkpoint: Checkpoint, temp_dir: Path) -> Path:
    return CheckpointRepository().save(temp_dir / "model.ckpt", checkpoint)


class TestCheckpointRepository:
    """Тесты формата чекпоинта."""

    def test_round_trip(self, checkpoint: Checkpoint, saved: Path) -> None:
        """Тест: сохранение и загрузка восстанавливают веса и состояние."""
        loaded = CheckpointRepository().load(saved)

        assert loaded.bundle.model_hash() == checkpoint.bundle.model_hash()
        assert loaded.train_state == checkpoint.train_state
        assert loaded.run_config == {"seed": 3}
        optimizer = loaded.optimizer_arrays["gen.m.embedder/head.w"]
        assert np.array_equal(optimizer, np.arange(6.0).reshape(2, 3))

    def test_rng_state_restores_stream(self, saved: Path) -> None:
        rng = np.random.default_rng()
        rng.bit_generator.state = CheckpointRepository().load(saved).rng_state

        assert np.array_equal(rng.random(4), np.random.default_rng(3).random(4))

    def test_no_temp_file_left(self, saved: Path) -> None:
        assert not saved.with_name(saved.name + ".tmp").exists()

    def test_magic_prefix(self, saved: Path) -> None:
        assert saved.read_bytes()[:8] == b"SEALKIT\x00"

    def test_flipped_byte_detected(self, saved: Path) -> None:
        """Тест: повреждение тела ловится контрольной суммой."""
        payload = bytearray(saved.read_bytes())
        payload[len(payload) // 2] ^= 0xFF
        saved.write_bytes(bytes(payload))

        with pytest.raises(CheckpointError):
            CheckpointRepository().load(saved)

    def test_truncated_file_detected(self, saved: Path) -> None:
        saved.write_bytes(saved.read_bytes()[:-100])

        with pytest.raises(CheckpointError):
            CheckpointRepository().load(saved)

    def test_wrong_version_rejected(self, saved: Path) -> None:
        payload = bytearray(saved.read_bytes())
        struct.pack_into("<H", payload, 8, 99)
        saved.write_bytes(bytes(payload))

        with pytest.raises(CheckpointError):
            CheckpointRepository().load(saved)

    def test_not_a_checkpoint(self, temp_dir: Path) -> None:
        path = temp_dir / "junk.ckpt"
        path.write_bytes(b"x" * 200)

        with pytest.raises(CheckpointError):
            CheckpointRepository().load(path)

    def test_missing_file(self, temp_dir: Path) -> None:
        with pytest.raises(CheckpointError):
            CheckpointRepository().load(temp_dir / "absent.ckpt")


class TestTrainingLogRepository:
    """Тесты JSONL-лога обучения."""

    def records(self) -> list[TrainRecord]:
        return [
            TrainRecord(
                kind="stage", step=0, stage=1, alpha=1.0, n_start=4, n_end=8, status="running"
            ),
            TrainRecord(step=0, stage=1, alpha=1.0, bit_acc=0.5, loss_msg=0.69),
            TrainRecord(step=1, stage=1, alpha=1.0, bit_acc=0.6, loss_msg=0.6),
            TrainRecord(
                kind="stage", step=2, stage=2, alpha=1.0, n_start=2, n_end=6, status="running"
            ),
            TrainRecord(step=2, stage=2, alpha=1.0, bit_acc=0.7, loss_msg=0.5),
        ]

    def test_append_and_read(self, temp_dir: Path) -> None:
        repo = TrainingLogRepository(temp_dir / "log.jsonl")
        repo.reset()
        for record in self.records():
            repo.append(record)

        assert repo.read() == self.records()

    def test_none_fields_omitted(self, temp_dir: Path) -> None:
        repo = TrainingLogRepository(temp_dir / "log.jsonl")
        repo.append(self.records()[1])

        assert "loss_adv" not in repo.path.read_text(encoding="utf-8")

    def test_truncate_after_checkpoint_step(self, temp_dir: Path) -> None:
        """Тест: после чекпоинта на шаге 2 остаются записи до него и смена стадии на шаге 2."""
        repo = TrainingLogRepository(temp_dir / "log.jsonl")
        for record in self.records():
            repo.append(record)

        repo.truncate_after(2)

        assert repo.read() == self.records()[:4]

    def test_missing_log(self, temp_dir: Path) -> None:
        with pytest.raises(DataError):
            TrainingLogRepository(temp_dir / "none.jsonl").read()

    def test_corrupt_line(self, temp_dir: Path) -> None:
        path = temp_dir / "log.jsonl"
        path.write_text('{"step": 0, "stage": 1, "alpha": 1.0}\nnot json\n', encoding="utf-8")

        with pytest.raises(DataError):
            TrainingLogRepository(path).read()


class TestRunsRepository:
    """Тесты истории запусков."""

    def test_start_and_finish(self, runs_repo: RunsRepository) -> None:
        run_id = runs_repo.start_run("train", seed=0, config_hash="abc")
        runs_repo.finish_run(run_id, "done", {"step": 10})

        runs = runs_repo.list_runs()
        assert len(runs) == 1
        assert runs[0]["id"] == run_id
        assert runs[0]["status"] == "done"
        assert runs[0]["summary"] == {"step": 10}
        assert runs[0]["finished_at"] is not None

    def test_filter_by_command_newest_first(self, runs_repo: RunsRepository) -> None:
        first = runs_repo.start_run("evaluate", seed=1)
        runs_repo.start_run("train", seed=2)
        second = runs_repo.start_run("evaluate", seed=3)

        runs = runs_repo.list_runs(command="evaluate")
        assert [r["id"] for r in runs] == [second, first]

    def test_unfinished_run_is_running(self, runs_repo: RunsRepository) -> None:
        runs_repo.start_run("ablate", seed=0)

        run = runs_repo.list_runs()[0]
        assert run["status"] == "running"
        assert run["summary"] is None

    def test_sql_error_wrapped(self, runs_repo: RunsRepository) -> None:
        with pytest.raises(DatabaseError):
            runs_repo.execute("SELECT * FROM missing_table")
