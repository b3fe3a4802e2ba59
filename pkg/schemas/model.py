"""
Pydantic-схемы архитектуры и полезной нагрузки водяного знака.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ArchConfig(BaseModel):
    """Гиперпараметры архитектуры эмбеддера, экстрактора и дискриминатора."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    model_res: int = Field(default=64, ge=8)
    n_bits: int = Field(default=16, ge=1)
    base_channels: int = Field(default=16, ge=4)
    depth: int = Field(default=3, ge=1, le=6)
    msg_embed_channels: int = Field(default=8, ge=1)
    norm_groups: int = Field(default=4, ge=1)

    @model_validator(mode="after")
    def check_divisibility(self) -> "ArchConfig":
        """model_res делится на 2^depth, каналы — на число групп."""
        if self.model_res % (2**self.depth) != 0:
            raise ValueError(
                f"model_res={self.model_res} должно делиться на 2^depth={2**self.depth}"
            )
        if self.base_channels % self.norm_groups != 0:
            raise ValueError(
                f"base_channels={self.base_channels} должно делиться "
                f"на norm_groups={self.norm_groups}"
            )
        return self


class BitMessage(BaseModel):
    """
    Полезная нагрузка m ∈ {0,1}^n_bits.

    Проводной формат — hex-строка, старший бит первым.
    """

    model_config = ConfigDict(frozen=True)

    bits: Tuple[int, ...]

    @field_validator("bits")
    @classmethod
    def bits_are_binary(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if not v:
            raise ValueError("Сообщение не может быть пустым")
        if any(b not in (0, 1) for b in v):
            raise ValueError(f"Биты должны быть 0 или 1, получено: {v}")
        return tuple(int(b) for b in v)

    @property
    def n_bits(self) -> int:
        return len(self.bits)

    def to_array(self, dtype=np.float64) -> np.ndarray:
        return np.asarray(self.bits, dtype=dtype)

    def to_hex(self) -> str:
        """Hex, старший бит первым; длина сообщения должна делиться на 4."""
        if self.n_bits % 4:
            raise ValueError(f"Длина {self.n_bits} не кратна 4, hex-представление невозможно")
        value = 0
        for bit in self.bits:
            value = (value << 1) | bit
        return f"{value:0{self.n_bits // 4}x}"

    @classmethod
    def from_hex(cls, text: str, n_bits: int) -> "BitMessage":
        """
        Разобрать hex-строку в сообщение длины n_bits.

        Raises:
            ValueError: неверные символы или длина не равна n_bits/4.
        """
        text = text.strip().lower()
        if text.startswith("0x"):
            text = text[2:]
        if n_bits % 4 or len(text) != n_bits // 4:
            raise ValueError(
                f"Ожидалось {n_bits // 4} hex-символов для {n_bits} бит, получено {len(text)}"
            )
        try:
            value = int(text, 16)
        except ValueError as exc:
            raise ValueError(f"Неверная hex-строка: {text!r}") from exc
        bits = tuple((value >> (n_bits - 1 - i)) & 1 for i in range(n_bits))
        return cls(bits=bits)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "BitMessage":
        return cls(bits=tuple(int(b) for b in np.asarray(array).reshape(-1)))

    @classmethod
    def random(cls, n_bits: int, rng: np.random.Generator) -> "BitMessage":
        """Равномерно случайное сообщение (i.i.d. Bernoulli(0.5))."""
        return cls(bits=tuple(int(b) for b in rng.integers(0, 2, size=n_bits)))
