"""Synthetic multivariate traffic with spatially propagated bursts and
injected distribution shifts.

Each series is a daily sinusoid (plus a half-day harmonic) around its own
level. Bursts start at a random series and reach ring neighbours a few steps
later with attenuated height, so one series' recent history carries
information about its neighbours' near future. Gaussian noise is added last,
then the drift plan is applied segment by segment.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .frame import TrafficFrame

DRIFT_KINDS = ("mean_shift", "scale_shift", "correlation_shift")


@dataclass(frozen=True)
class DriftEvent:
    """A shift applied from ``start`` up to ``end`` (exclusive).

    ``end=None`` runs until the next event starts, or the end of the stream.
    """

    start: int
    kind: str
    magnitude: float
    end: int | None = None

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise ConfigError(f"unknown drift kind {self.kind!r}; expected one of {DRIFT_KINDS}")
        if self.start < 0 or (self.end is not None and self.end <= self.start):
            raise ConfigError(f"bad drift segment [{self.start}, {self.end})")
        if self.kind == "scale_shift" and self.magnitude <= -1:
            raise ConfigError("scale_shift magnitude must be > -1")
        if self.kind == "correlation_shift" and not -1 < self.magnitude < 1:
            raise ConfigError("correlation_shift magnitude must lie in (-1, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> "DriftEvent":
        try:
            return cls(int(d["start"]), str(d["kind"]), float(d["magnitude"]),
                       None if d.get("end") is None else int(d["end"]))
        except KeyError as exc:
            raise ConfigError(f"drift event missing field {exc}") from exc


def resolve_segments(plan, length: int) -> list:
    """``(start, end, event)`` triples; rejects overlapping segments."""
    events = sorted((e if isinstance(e, DriftEvent) else DriftEvent.from_dict(e) for e in plan),
                    key=lambda e: e.start)
    out = []
    for i, e in enumerate(events):
        if e.start >= length:
            raise ConfigError(f"drift at {e.start} starts beyond stream length {length}")
        nxt = events[i + 1].start if i + 1 < len(events) else length
        end = min(e.end, length) if e.end is not None else nxt
        if end > nxt or (i + 1 < len(events) and nxt == e.start):
            raise ConfigError(f"drift segment [{e.start}, {end}) overlaps the one starting at {nxt}")
        out.append((e.start, end, e))
    return out


def _bursts(rng, n_series, length, rate, scale, decay, coupling, lag, hops):
    out = np.zeros((length + lag * hops + 1, n_series))
    kernel_len = int(np.ceil(np.log(1e-3) / np.log(decay))) if decay > 0 else 1
    kernel = decay ** np.arange(kernel_len)
    counts = rng.poisson(rate, size=(length, n_series))
    for t, n in zip(*np.nonzero(counts)):
        height = rng.exponential(scale) * counts[t, n]
        for hop in range(hops + 1):
            h = height * coupling**hop
            t0 = t + hop * lag
            stop = min(t0 + kernel_len, len(out))
            for target in {(n + hop) % n_series, (n - hop) % n_series}:
                out[t0:stop, target] += h * kernel[: stop - t0]
    return out[:length]


def _shift_correlation(rng, block, delta):
    """Add a shared factor (delta > 0) or private noise (delta < 0) to ``block``."""
    n = block.shape[1]
    if n < 2:
        return block
    c = np.cov(block, rowvar=False)
    var = float(np.mean(np.diag(c)))
    cov = float((c.sum() - np.trace(c)) / (n * (n - 1)))
    rho = cov / var
    target = float(np.clip(rho + delta, -0.95, 0.98))
    if delta > 0:
        v = max((target * var - cov) / (1.0 - target), 0.0)
        return block + rng.normal(0.0, np.sqrt(v), size=(len(block), 1))
    if cov <= 0:
        return block
    target = max(target, 1e-3)
    v = max(cov / target - var, 0.0)
    return block + rng.normal(0.0, np.sqrt(v), size=block.shape)


def synth_stream(n_series: int, length: int, drift_plan=(), seed: int = 0, *, period: int = 144,
                 level: float = 10.0, amplitude: float = 3.0, noise_std: float = 1.0,
                 burst_rate: float = 0.01, burst_scale: float = 4.0, burst_decay: float = 0.8,
                 coupling: float = 0.8, burst_lag: int = 3, hops: int = 2,
                 interval_s: int = 600) -> TrafficFrame:
    if n_series < 1 or length < 2:
        raise ConfigError("need at least one series and two timesteps")
    segments = resolve_segments(drift_plan, length)
    rng = np.random.default_rng(seed)
    t = np.arange(length)[:, None]
    levels = level + rng.normal(0.0, 1.0, n_series)
    amps = amplitude * rng.uniform(0.8, 1.2, n_series)
    phases = rng.uniform(-0.3, 0.3, n_series)
    w = 2 * np.pi * t / period
    base = levels + amps * (np.sin(w + phases) + 0.3 * np.sin(2 * w + 2 * phases))
    bursts = _bursts(rng, n_series, length, burst_rate, burst_scale, burst_decay, coupling,
                     burst_lag, min(hops, n_series // 2))
    values = base + bursts + rng.normal(0.0, noise_std, size=(length, n_series))
    for start, end, e in segments:
        seg = values[start:end]
        if e.kind == "mean_shift":
            values[start:end] = seg + e.magnitude
        elif e.kind == "scale_shift":
            values[start:end] = levels + (seg - levels) * (1.0 + e.magnitude)
        else:
            values[start:end] = _shift_correlation(rng, seg, e.magnitude)
    return TrafficFrame.from_array(values, interval_s=interval_s)
