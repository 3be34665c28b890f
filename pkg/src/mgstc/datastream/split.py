from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .frame import TrafficFrame


@dataclass(frozen=True)
class SplitSpec:
    train: int = 5
    val: int = 2
    test: int = 55

    def __post_init__(self):
        if min(self.train, self.val, self.test) <= 0:
            raise ConfigError(f"split ratios must be positive, got {self.ratios}")

    @property
    def ratios(self) -> tuple:
        return (self.train, self.val, self.test)

    def sizes(self, length: int) -> tuple:
        total = sum(self.ratios)
        n_train = length * self.train // total
        n_val = length * self.val // total
        return n_train, n_val, length - n_train - n_val

    @classmethod
    def parse(cls, text: str) -> "SplitSpec":
        try:
            parts = [int(p) for p in text.split(":")]
        except ValueError as exc:
            raise ConfigError(f"split must look like '5:2:55', got {text!r}") from exc
        if len(parts) != 3:
            raise ConfigError(f"split must have three parts, got {text!r}")
        return cls(*parts)


@dataclass(frozen=True)
class Normalizer:
    """Per-series z-score fitted on one segment."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, values, floor: float = 1e-8) -> "Normalizer":
        values = np.asarray(values, dtype=np.float64)
        return cls(values.mean(axis=0), np.maximum(values.std(axis=0), floor))

    def transform(self, values):
        return (np.asarray(values) - self.mean) / self.std

    def inverse_transform(self, values):
        return np.asarray(values) * self.std + self.mean

    def inverse_series_last(self, values):
        """Denormalize arrays laid out ``(..., N, steps)``."""
        return np.asarray(values) * self.std[:, None] + self.mean[:, None]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


def ewm_smooth(values, alpha: float = 0.3) -> np.ndarray:
    """Exponentially weighted moving average along time (axis 0)."""
    if not 0 < alpha <= 1:
        raise ConfigError(f"smoothing factor must be in (0, 1], got {alpha}")
    values = np.asarray(values, dtype=np.float64)
    out = np.empty_like(values)
    out[0] = values[0]
    for t in range(1, len(values)):
        out[t] = alpha * values[t] + (1 - alpha) * out[t - 1]
    return out


def split_and_normalize(frame: TrafficFrame, spec: SplitSpec, history: int | None = None,
                        horizon: int | None = None):
    """Chronological split; the normalizer only ever sees the training rows."""
    sizes = spec.sizes(frame.length)
    if history is not None and horizon is not None:
        need = history + horizon
        for name, n in zip(("train", "val", "test"), sizes):
            if n < need:
                raise ConfigError(
                    f"{name} segment has {n} rows, fewer than history+horizon={need}"
                )
    a, b = sizes[0], sizes[0] + sizes[1]
    norm = Normalizer.fit(frame.values[:a])
    parts = [frame.slice(0, a), frame.slice(a, b), frame.slice(b, frame.length)]
    train, val, test = (p.with_values(norm.transform(p.values)) for p in parts)
    return train, val, test, norm
