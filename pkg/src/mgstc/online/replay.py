"""FIFO stores backing the two update stages."""
from __future__ import annotations

from collections import deque
from typing import NamedTuple

import numpy as np

from ..errors import ConfigError


class Sample(NamedTuple):
    x: np.ndarray  # (N, T)
    y: np.ndarray  # (N, tau)
    loss: float


def stack(samples) -> tuple:
    return np.stack([s.x for s in samples]), np.stack([s.y for s in samples])


class ReplayStores:
    """Recent-sample buffer plus a larger long-term repository.

    Both evict oldest-first when full. :meth:`flush` moves the buffer's
    contents into the repository in arrival order and empties the buffer.
    """

    def __init__(self, cap_buffer: int = 100, cap_history: int = 256):
        if cap_buffer < 1 or cap_history < 1:
            raise ConfigError("store capacities must be >= 1")
        self.buffer = deque(maxlen=cap_buffer)
        self.history = deque(maxlen=cap_history)

    @property
    def cap_buffer(self) -> int:
        return self.buffer.maxlen

    @property
    def cap_history(self) -> int:
        return self.history.maxlen

    def push(self, samples) -> None:
        self.buffer.extend(samples)

    def flush(self) -> None:
        self.history.extend(self.buffer)
        self.buffer.clear()

    def buffer_losses(self) -> np.ndarray:
        return np.fromiter((s.loss for s in self.buffer), dtype=np.float64, count=len(self.buffer))

    def sample_buffer(self, k: int, rng: np.random.Generator) -> list:
        """Up to ``k`` distinct buffer samples, uniformly at random."""
        k = min(k, len(self.buffer))
        idx = rng.choice(len(self.buffer), size=k, replace=False)
        return [self.buffer[i] for i in idx]

    def sample_history(self, k: int, rng: np.random.Generator) -> list:
        """``k`` repository samples drawn uniformly with replacement."""
        idx = rng.integers(len(self.history), size=k)
        return [self.history[i] for i in idx]
