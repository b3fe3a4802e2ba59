"""
Сохранение отчётов: CSV и JSON оценки, JSON-схема, таблица для консоли,
кривые обучения и таблица абляций.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
from pydantic import ValidationError as PydanticValidationError  # noqa: E402

from config.constants import CATEGORY_ORDER  # noqa: E402
from core.exceptions import DataError  # noqa: E402
from schemas.report import EvalReport  # noqa: E402
from schemas.training import TrainRecord  # noqa: E402


logger = logging.getLogger(__name__)

SCHEMA_FILE = "eval_report.schema.json"


class ReportService:
    """Запись отчётов в директорию."""

    def __init__(self) -> None:
        plt.rcParams["font.family"] = "DejaVu Sans"
        plt.rcParams["axes.unicode_minus"] = False

    def rows_frame(self, report: EvalReport) -> pd.DataFrame:
        """Одна строка на атаку."""
        return pd.DataFrame([row.model_dump() for row in report.rows])

    def write_eval(self, report: EvalReport, out_path: Path) -> Dict[str, Path]:
        """
        Записать <out>.json, <out>.csv и схему рядом.

        Args:
            out_path: путь к JSON-отчёту; CSV получает то же имя с .csv.

        Raises:
            DataError: не удалось записать файлы.
        """
        json_path = Path(out_path).with_suffix(".json")
        csv_path = json_path.with_suffix(".csv")
        schema_path = json_path.parent / SCHEMA_FILE
        try:
            json_path.parent.mkdir(parents=True, exist_ok=True)
            json_path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
            self.rows_frame(report).to_csv(csv_path, index=False)
            schema = json.dumps(EvalReport.model_json_schema(), indent=2)
            schema_path.write_text(schema, encoding="utf-8")
        except OSError as exc:
            logger.exception(f"Не удалось записать отчёт {json_path}")
            raise DataError(
                f"Не удалось записать отчёт: {json_path}",
                {"path": str(json_path)},
            ) from exc
        logger.info(f"Отчёт записан: {json_path}, {csv_path}")
        return {"json": json_path, "csv": csv_path, "schema": schema_path}

    def read_eval(self, path: Path) -> EvalReport:
        """
        Raises:
            DataError: файла нет или он не соответствует схеме.
        """
        path = Path(path)
        try:
            return EvalReport.model_validate_json(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"Не удалось прочитать отчёт: {path}", {"path": str(path)}) from exc
        except PydanticValidationError as exc:
            raise DataError(f"Отчёт не соответствует схеме: {path}", {"path": str(path)}) from exc

    def category_table(self, report: EvalReport) -> str:
        """Агрегаты категорий в порядке колонок (identity … combined) + качество."""
        header = ["metric"] + CATEGORY_ORDER
        acc = ["bit_acc"] + [_fmt(report.category_aggregates.get(name)) for name in CATEGORY_ORDER]
        nlp = ["-log10p"] + [
            _fmt(report.category_neg_log10_p.get(name), 2) for name in CATEGORY_ORDER
        ]
        lines = ["\t".join(header), "\t".join(acc), "\t".join(nlp)]
        if report.quality is not None:
            psnr = "inf" if report.quality.psnr is None else _fmt(report.quality.psnr, 2)
            lines.append(f"psnr\t{psnr}\tssim\t{report.quality.ssim:.4f}")
        if report.speedup is not None:
            lines.append(f"speedup\t{report.speedup:.2f}")
        return "\n".join(lines)

    def plot_training_curves(self, records: Sequence[TrainRecord], out_path: Path) -> Path:
        """Точность по битам, лоссы и α по шагам в один PNG."""
        steps: List[TrainRecord] = [r for r in records if r.kind == "step"]
        stages = [r for r in records if r.kind == "stage"]
        frame = pd.DataFrame([r.model_dump() for r in steps])
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)

        fig, axes = plt.subplots(3, 1, figsize=(8, 9), sharex=True)
        if not frame.empty:
            axes[0].plot(frame["step"], frame["bit_acc"], color="tab:blue")
            for column in ("loss_msg", "loss_adv", "loss_perc", "loss_disc"):
                if column in frame and frame[column].notna().any():
                    axes[1].plot(frame["step"], frame[column], label=column)
            axes[2].plot(frame["step"], frame["alpha"], color="tab:green")
        for record in stages:
            for ax in axes:
                ax.axvline(record.step, color="gray", linestyle="--", linewidth=0.8)
        axes[0].set_ylabel("bit accuracy")
        axes[1].set_ylabel("loss")
        axes[1].legend(loc="upper right", fontsize=8)
        axes[2].set_ylabel("alpha")
        axes[2].set_xlabel("step")
        fig.tight_layout()
        fig.savefig(out_path, dpi=100)
        plt.close(fig)
        logger.info(f"Кривые обучения: {out_path}")
        return out_path

    def write_ablation(self, table: pd.DataFrame, out_path: Path) -> Path:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(out_path, index=False)
        return out_path


def _fmt(value, digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}f}"
