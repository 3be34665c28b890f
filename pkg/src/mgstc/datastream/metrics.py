from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..numcore import kernels


def cumulative_mse(trace) -> np.ndarray:
    """Running mean of per-batch MSEs, summed with error compensation."""
    trace = np.asarray(trace, dtype=np.float64)
    if trace.size == 0:
        raise ConfigError("cumulative_mse needs at least one value")
    return kernels.cumulative_mean(trace)


@dataclass
class MetricTrace:
    mse: list = field(default_factory=list)
    mae: list = field(default_factory=list)
    drift: list = field(default_factory=list)

    def append(self, mse: float, mae: float, drift: bool = False) -> None:
        self.mse.append(float(mse))
        self.mae.append(float(mae))
        self.drift.append(bool(drift))

    def mark_drift(self, index: int) -> None:
        self.drift[index] = True

    def __len__(self) -> int:
        return len(self.mse)

    @property
    def cum_mse(self) -> np.ndarray:
        return cumulative_mse(self.mse)

    @property
    def final_cum_mse(self) -> float:
        return float(self.cum_mse[-1])

    def rows(self):
        cum = self.cum_mse if self.mse else []
        for i, (a, b, c, d) in enumerate(zip(self.mse, self.mae, cum, self.drift)):
            yield i, a, b, float(c), int(d)

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["batch", "mse", "mae", "cum_mse", "drift"])
            for i, a, b, c, d in self.rows():
                w.writerow([i, repr(a), repr(b), repr(c), d])
