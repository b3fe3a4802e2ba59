"""
Хук внешнего видеокодека (H.264/H.265).

Исполняемый файл задаётся SEALKIT_EXTERNAL_ENCODER и вызывается так:

    <encoder> <codec> <crf> <width> <height> <in.raw> <out.raw>

in.raw/out.raw — кадры подряд, rgb24 (8 бит на канал, H×W×3 на кадр).
Энкодер обязан записать в out.raw столько же кадров того же размера.
Без настроенного энкодера атаки с кодеком пропускаются.
"""

from __future__ import annotations

import logging
import shutil
import subprocess
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np

from config.settings import settings
from core.exceptions import ExternalCodecError


logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 600


class ExternalCodec:
    """Обёртка над внешним энкодером; без энкодера available() → False."""

    def __init__(self, encoder: Optional[str] = None, timeout: float = DEFAULT_TIMEOUT_S) -> None:
        self.encoder = encoder if encoder is not None else settings.external_encoder
        self.timeout = timeout

    def available(self) -> bool:
        if not self.encoder:
            return False
        return Path(self.encoder).is_file() or shutil.which(self.encoder) is not None

    def roundtrip(self, frames: np.ndarray, codec: str, crf: int) -> np.ndarray:
        """
        Сжать и распаковать последовательность.

        Args:
            frames: (T, 3, H, W) в [0, 1].
            codec: имя кодека (h264, h264rgb, h265).
            crf: коэффициент качества.

        Returns:
            (T, 3, H, W) в [0, 1].

        Raises:
            ExternalCodecError: энкодер не настроен, упал или вернул не тот размер.
        """
        if not self.available():
            raise ExternalCodecError(
                "Внешний энкодер не настроен (SEALKIT_EXTERNAL_ENCODER)",
                {"encoder": self.encoder, "codec": codec},
            )
        frames = np.asarray(frames, dtype=np.float64)
        t, _, h, w = frames.shape
        raw = np.round(np.clip(frames, 0.0, 1.0) * 255.0).astype(np.uint8).transpose(0, 2, 3, 1)

        with tempfile.TemporaryDirectory(prefix="sealkit-codec-") as tmp:
            src = Path(tmp) / "in.raw"
            dst = Path(tmp) / "out.raw"
            src.write_bytes(raw.tobytes())
            command = [self.encoder, codec, str(int(crf)), str(w), str(h), str(src), str(dst)]
            logger.debug(f"Внешний кодек: {' '.join(command)}")
            try:
                subprocess.run(command, check=True, capture_output=True, timeout=self.timeout)
            except (OSError, subprocess.SubprocessError) as exc:
                logger.exception("Внешний энкодер завершился с ошибкой")
                stderr = getattr(exc, "stderr", None)
                raise ExternalCodecError(
                    "Ошибка внешнего энкодера",
                    {
                        "command": command,
                        "error": str(exc),
                        "stderr": stderr.decode("utf-8", "replace")[-500:] if stderr else None,
                    },
                ) from exc
            if not dst.exists():
                raise ExternalCodecError("Энкодер не создал выходной файл", {"path": str(dst)})
            decoded = np.frombuffer(dst.read_bytes(), dtype=np.uint8)

        if decoded.size != raw.size:
            raise ExternalCodecError(
                "Размер декодированных кадров не совпадает",
                {"expected": raw.size, "got": decoded.size},
            )
        return decoded.reshape(t, h, w, 3).transpose(0, 3, 1, 2).astype(np.float64) / 255.0
