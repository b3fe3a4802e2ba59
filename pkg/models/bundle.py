"""
ModelBundle — параметры трёх сетей и архитектура.

Имена тензоров стабильны: "<сеть>/<слой>.<параметр>", например
"embedder/down1.a.conv.weight". Они же используются в чекпоинте.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, Mapping, Tuple

import numpy as np

from core.exceptions import CheckpointError, NumericError
from models.discriminator import init_discriminator
from models.embedder import init_embedder
from models.extractor import init_extractor
from models.layers import Params, cast_params
from schemas.model import ArchConfig


logger = logging.getLogger(__name__)

NETWORKS: Tuple[str, ...] = ("embedder", "extractor", "discriminator")

_INITIALIZERS = {
    "embedder": init_embedder,
    "extractor": init_extractor,
    "discriminator": init_discriminator,
}


def expected_shapes(arch: ArchConfig) -> Dict[str, Dict[str, Tuple[int, ...]]]:
    """Имена и формы тензоров каждой сети для архитектуры, без случайной инициализации."""
    return {
        net: {name: array.shape for name, array in init(arch, None).items()}
        for net, init in _INITIALIZERS.items()
    }


@dataclass
class ModelBundle:
    """Embedder + extractor + discriminator."""

    arch: ArchConfig
    embedder: Params = field(default_factory=dict)
    extractor: Params = field(default_factory=dict)
    discriminator: Params = field(default_factory=dict)

    @classmethod
    def initialize(cls, arch: ArchConfig, seed: int, dtype: str = "float32") -> "ModelBundle":
        """Случайная инициализация; одинаковый seed → одинаковые веса."""
        rng = np.random.default_rng(seed)
        bundle = cls(
            arch=arch,
            embedder=cast_params(init_embedder(arch, rng), dtype),
            extractor=cast_params(init_extractor(arch, rng), dtype),
            discriminator=cast_params(init_discriminator(arch, rng), dtype),
        )
        logger.debug(f"Инициализированы модели: {bundle.n_parameters()} параметров, seed={seed}")
        return bundle

    def network(self, name: str) -> Params:
        if name not in NETWORKS:
            raise KeyError(name)
        return getattr(self, name)

    def named_arrays(self) -> Iterator[Tuple[str, np.ndarray]]:
        """Все тензоры в стабильном порядке: сеть, затем имя."""
        for net in NETWORKS:
            params = self.network(net)
            for name in sorted(params):
                yield f"{net}/{name}", params[name]

    @classmethod
    def from_named_arrays(cls, arch: ArchConfig, arrays: Mapping[str, np.ndarray]) -> "ModelBundle":
        """
        Собрать bundle из плоского словаря (загрузка чекпоинта).

        Raises:
            CheckpointError: набор имён не совпадает с архитектурой.
        """
        groups: Dict[str, Params] = {net: {} for net in NETWORKS}
        for full_name, value in arrays.items():
            net, _, name = full_name.partition("/")
            if net not in groups or not name:
                raise CheckpointError("Неизвестный тензор в чекпоинте", {"name": full_name})
            groups[net][name] = value
        bundle = cls(arch=arch, **groups)

        for net, expected in expected_shapes(arch).items():
            actual = {n: a.shape for n, a in bundle.network(net).items()}
            if expected != actual:
                missing = sorted(set(expected) - set(actual))
                extra = sorted(set(actual) - set(expected))
                raise CheckpointError(
                    "Тензоры чекпоинта не соответствуют архитектуре",
                    {"network": net, "missing": missing[:5], "unexpected": extra[:5]},
                )
        return bundle

    def n_parameters(self) -> int:
        return sum(array.size for _, array in self.named_arrays())

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.embedder.values())).dtype

    def check_finite(self) -> None:
        """
        Raises:
            NumericError: есть NaN/inf в параметрах.
        """
        for name, array in self.named_arrays():
            if not np.all(np.isfinite(array)):
                raise NumericError("Нечисловые значения в параметрах", {"tensor": name})

    def copy(self) -> "ModelBundle":
        """Глубокая копия (снимок для оценки во время обучения)."""
        return ModelBundle(
            arch=self.arch,
            embedder={k: v.copy() for k, v in self.embedder.items()},
            extractor={k: v.copy() for k, v in self.extractor.items()},
            discriminator={k: v.copy() for k, v in self.discriminator.items()},
        )

    def model_hash(self) -> str:
        """SHA-256 (первые 16 hex) от архитектуры и всех тензоров."""
        digest = hashlib.sha256(self.arch.model_dump_json().encode("utf-8"))
        for name, array in self.named_arrays():
            digest.update(name.encode("utf-8"))
            digest.update(str(array.dtype).encode("ascii"))
            digest.update(np.ascontiguousarray(array).tobytes())
        return digest.hexdigest()[:16]
