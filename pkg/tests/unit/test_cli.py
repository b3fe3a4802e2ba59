"""
Unit-тесты командной строки: коды выхода и артефакты подкоманд.
"""

import json
from pathlib import Path

import pytest

from cli.app import build_parser, exit_code_for, main
from config.settings import settings
from core.exceptions import (
    AttackError,
    CheckpointError,
    ConfigurationError,
    DataError,
    NumericError,
    ShapeError,
    TrainingError,
    ValidationError,
)
from models import ModelBundle
from repositories.checkpoint_repo import Checkpoint, CheckpointRepository
from repositories.training_log_repo import TrainingLogRepository
from schemas.model import ArchConfig, BitMessage
from schemas.training import DataConfig, RunConfig, TrainConfig


@pytest.fixture(autouse=True)
def logs_in_temp(temp_dir: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr(settings.paths, "logs_dir", temp_dir / "logs")


@pytest.fixture
def checkpoint_path(tiny_bundle: ModelBundle, temp_dir: Path) -> Path:
    return CheckpointRepository().save(temp_dir / "model.ckpt", Checkpoint(bundle=tiny_bundle))


@pytest.fixture
def run_config_path(tiny_arch: ArchConfig, fast_train_config: TrainConfig, temp_dir: Path) -> Path:
    config = RunConfig(
        seed=1,
        arch=tiny_arch,
        train=fast_train_config,
        data=DataConfig(synthetic_images=4, synthetic_size=48),
    )
    path = temp_dir / "run.json"
    path.write_text(config.model_dump_json(), encoding="utf-8")
    return path


class TestExitCodes:
    @pytest.mark.parametrize(
        "exc,code",
        [
            (ValidationError("x"), 2),
            (ConfigurationError("x"), 2),
            (ShapeError("x"), 2),
            (AttackError("x"), 2),
            (DataError("x"), 3),
            (CheckpointError("x"), 3),
            (NumericError("x"), 4),
            (TrainingError("x"), 4),
        ],
    )
    def test_mapping(self, exc, code: int) -> None:
        assert exit_code_for(exc) == code

    def test_command_required(self) -> None:
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_bad_hex_is_usage_error(self, checkpoint_path: Path, sample_png: Path, capsys) -> None:
        assert main(["detect", str(checkpoint_path), str(sample_png), "zz"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_wrong_message_length(self, checkpoint_path: Path, sample_png: Path) -> None:
        assert main(["detect", str(checkpoint_path), str(sample_png), "abcd"]) == 2

    def test_missing_dataset_is_data_error(self, checkpoint_path: Path, temp_dir: Path) -> None:
        missing = str(temp_dir / "missing")
        code = main(["evaluate", str(checkpoint_path), missing, "--out", str(temp_dir / "r.json")])

        assert code == 3

    def test_corrupt_checkpoint_is_data_error(self, temp_dir: Path, sample_png: Path) -> None:
        bad = temp_dir / "bad.ckpt"
        bad.write_bytes(b"\x00" * 64)

        assert main(["extract", str(bad), str(sample_png)]) == 3

    def test_invalid_config_is_usage_error(self, temp_dir: Path) -> None:
        config = temp_dir / "bad.json"
        config.write_text(json.dumps({"train": {"no_such_key": 1}}), encoding="utf-8")

        assert main(["--config", str(config), "train", "--out", str(temp_dir / "run")]) == 2


class TestDetectCommand:
    def test_detected_exit_zero(
        self, checkpoint_path: Path, sample_png: Path, mocker, capsys
    ) -> None:
        message = BitMessage.from_hex("a5", 8)
        mocker.patch("cli.commands.extract_full_res", return_value=message.to_array())

        code = main(["detect", str(checkpoint_path), str(sample_png), "a5", "--tau", "2"])

        report = json.loads(capsys.readouterr().out)
        assert code == 0
        assert report["detected"] is True and report["hamming"] == 0

    def test_not_detected_exit_one(self, checkpoint_path: Path, sample_png: Path, mocker) -> None:
        message = BitMessage.from_hex("a5", 8)
        mocker.patch("cli.commands.extract_full_res", return_value=1.0 - message.to_array())

        assert main(["detect", str(checkpoint_path), str(sample_png), "a5"]) == 1


class TestEmbedExtract:
    def test_embed_then_extract(
        self, checkpoint_path: Path, sample_png: Path, temp_dir: Path, capsys
    ) -> None:
        out = temp_dir / "marked.png"

        assert main(["embed", str(checkpoint_path), str(sample_png), "a5", str(out)]) == 0
        assert out.exists()
        capsys.readouterr()

        assert main(["extract", str(checkpoint_path), str(out)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["bits"]) == 8 and len(payload["soft"]) == 8
        assert "".join(map(str, BitMessage.from_hex(payload["hex"], 8).bits)) == payload["bits"]

    def test_null_check(self, checkpoint_path: Path, image_dir: Path, capsys) -> None:
        assert main(["null-check", str(checkpoint_path), str(image_dir), "--trials", "20"]) == 0
        payload = json.loads(capsys.readouterr().out)

        assert payload["n_trials"] == 80
        assert payload["bound"] == pytest.approx(1e-4)

    def test_evaluate_writes_reports(
        self, checkpoint_path: Path, image_dir: Path, temp_dir: Path
    ) -> None:
        out = temp_dir / "reports" / "eval.json"

        args = ["evaluate", str(checkpoint_path), str(image_dir), "--suite", "identity"]
        assert main(args + ["--out", str(out)]) == 0
        assert out.exists() and out.with_suffix(".csv").exists()


class TestTrainCommand:
    def test_train_and_resume(self, run_config_path: Path, temp_dir: Path, capsys) -> None:
        """Тест: обучение пишет лог, чекпоинты и кривые; продолжение доводит до конца."""
        out = temp_dir / "run"

        args = ["--config", str(run_config_path), "train", "--out", str(out), "--max-steps", "4"]
        assert main(args) == 0
        summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert summary["step"] == 4
        assert (out / "training_log.jsonl").exists()
        assert (out / "step_000003.ckpt").exists()
        assert (out / "final.ckpt").exists()
        assert (out / "training_curves.png").exists()

        code = main(
            [
                "--config",
                str(run_config_path),
                "train",
                "--out",
                str(out),
                "--resume",
                str(out / "step_000003.ckpt"),
            ]
        )
        assert code == 0
        records = TrainingLogRepository(out / "training_log.jsonl").read()
        steps = [r.step for r in records if r.kind == "step"]
        assert steps == sorted(set(steps))
        assert records[-1].kind == "summary"
