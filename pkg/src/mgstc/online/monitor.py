"""Loss-based concept drift monitor.

The monitor compares the mean test loss of the newest samples with the mean
of the losses held in the replay buffer and raises a drift flag when the
one-sided upper-tail p-value of that increase falls below the threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ..errors import ConfigError

SE_MODES = ("two_sample", "window")


@dataclass(frozen=True)
class DriftVerdict:
    z_statistic: float
    p_value: float
    drifted: bool
    batch_index: int = 0

    def to_record(self, stage: str) -> dict:
        return {"batch_index": self.batch_index, "z": self.z_statistic, "p_value": self.p_value,
                "drifted": self.drifted, "stage": stage}


def monitor_check(batch_losses, loss_window, d: float, *, batch_index: int = 0,
                  se_mode: str = "two_sample", eps_sigma: float = 1e-8) -> DriftVerdict:
    """Test whether the current losses sit above the buffered ones.

    ``se_mode="two_sample"`` standardizes the mean difference by
    ``sigma * sqrt(1/n + 1/B)``, which is N(0, 1) under a stationary loss
    distribution. ``se_mode="window"`` uses ``sigma / sqrt(B)`` and ignores
    the noise of the current batch mean; it over-alarms unless the batch is
    much larger than the window.

    With a single current loss, sigma comes from the last (up to) eight
    losses, the current one included.
    """
    if not 0.0 < d < 1.0:
        raise ConfigError(f"drift threshold must lie in (0, 1), got {d}")
    if se_mode not in SE_MODES:
        raise ConfigError(f"se_mode must be one of {SE_MODES}, got {se_mode!r}")
    window = np.asarray(loss_window, dtype=np.float64).reshape(-1)
    batch = np.asarray(batch_losses, dtype=np.float64).reshape(-1)
    if window.size == 0 or batch.size == 0:
        return DriftVerdict(0.0, 1.0, False, batch_index)
    n, b = batch.size, window.size
    if n > 1:
        spread = batch
    else:
        spread = np.concatenate([window[-7:], batch])
    sigma = float(spread.std(ddof=1)) if spread.size > 1 else 0.0
    sigma = max(sigma, eps_sigma)
    diff = float(batch.mean() - window.mean())
    if se_mode == "two_sample":
        se = sigma * math.sqrt(1.0 / n + 1.0 / b)
    else:
        se = sigma / math.sqrt(b)
    z = diff / se
    p = float(ndtr(-z))
    return DriftVerdict(z, p, p < d, batch_index)


class DriftMonitor:
    """Stateful wrapper that counts checks and alarms since the last reset."""

    def __init__(self, threshold: float = 0.05, se_mode: str = "two_sample",
                 eps_sigma: float = 1e-8):
        if not 0.0 < threshold < 1.0:
            raise ConfigError(f"drift threshold must lie in (0, 1), got {threshold}")
        self.threshold = threshold
        self.se_mode = se_mode
        self.eps_sigma = eps_sigma
        self.checks = 0
        self.alarms = 0

    def check(self, batch_losses, loss_window, batch_index: int = 0) -> DriftVerdict:
        v = monitor_check(batch_losses, loss_window, self.threshold, batch_index=batch_index,
                          se_mode=self.se_mode, eps_sigma=self.eps_sigma)
        self.checks += 1
        self.alarms += v.drifted
        return v

    def reset(self) -> None:
        self.checks = 0
        self.alarms = 0
