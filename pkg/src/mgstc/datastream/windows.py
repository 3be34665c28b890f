"""Sliding (history, target) windows over a time-major value matrix."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .frame import TrafficFrame


def _values(source) -> np.ndarray:
    return source.values if isinstance(source, TrafficFrame) else np.asarray(source, dtype=np.float64)


def window_starts(length: int, history: int, horizon: int, stride: int = 1) -> np.ndarray:
    if stride < 1:
        raise ConfigError(f"window stride must be >= 1, got {stride}")
    if length < history + horizon:
        raise ConfigError(f"segment of length {length} is shorter than history+horizon={history + horizon}")
    return np.arange(0, length - history - horizon + 1, stride)


def window_count(length: int, history: int, horizon: int, stride: int = 1) -> int:
    return len(window_starts(length, history, horizon, stride))


def window_batch(values: np.ndarray, starts, history: int, horizon: int):
    """Gather windows at ``starts`` as ``X (B, N, T)`` and ``Y (B, N, tau)``."""
    starts = np.asarray(starts)
    x_idx = starts[:, None] + np.arange(history)
    y_idx = starts[:, None] + history + np.arange(horizon)
    return (np.ascontiguousarray(values[x_idx].transpose(0, 2, 1)),
            np.ascontiguousarray(values[y_idx].transpose(0, 2, 1)))


def windows(source, history: int, horizon: int, stride: int = 1):
    """Lazily yield ``(X (N, T), Y (N, tau))`` in chronological order."""
    values = _values(source)
    for s in window_starts(len(values), history, horizon, stride):
        yield values[s : s + history].T.copy(), values[s + history : s + history + horizon].T.copy()


def batched_windows(source, history: int, horizon: int, batch_size: int, stride: int = 1):
    """Lazily yield ``(starts, X, Y)`` mini-batches; at most ``batch_size`` windows live at once."""
    values = _values(source)
    starts = window_starts(len(values), history, horizon, stride)
    for i in range(0, len(starts), batch_size):
        s = starts[i : i + batch_size]
        x, y = window_batch(values, s, history, horizon)
        yield s, x, y
