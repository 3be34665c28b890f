"""Streaming inference with fine-tuning, drift monitoring and aggressive updates.

Per arriving batch the learner predicts and records metrics first. Samples
whose targets have arrived (``label_delay`` steps after their last observed
step) are then checked by the monitor against the buffered losses, used for
one fine-tuning update (mixed with a replayed buffer batch) and pushed into
the buffer. A drift verdict additionally triggers the multi-epoch aggressive
update on buffer and perturbed repository samples, after which the buffer is
flushed into the repository.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..datastream.metrics import MetricTrace
from ..datastream.windows import batched_windows
from ..errors import ConfigError
from ..numcore import Tensor, no_grad
from ..stmodel.model import MGSTC, mse_loss
from .augmentation import augment_sample
from .monitor import SE_MODES, DriftMonitor, DriftVerdict
from .replay import ReplayStores, Sample, stack

log = logging.getLogger(__name__)

STAGE_FROZEN = "frozen"
STAGE_WAIT = "await_labels"
STAGE_FINE = "fine_tune"
STAGE_AGGRESSIVE = "fine_tune+aggressive"


@dataclass(frozen=True)
class OnlineConfig:
    eta_fine: float = 0.5
    eta_aggr: float = 0.5
    threshold: float = 0.05
    cap_buffer: int = 100
    cap_history: int = 256
    aggressive_epochs: int = 5
    xi: float = 0.05**2
    batch_size: int = 16
    replay: str = "batch"  # or "single"
    label_delay: int | None = None  # None: the model horizon
    se_mode: str = "two_sample"
    online: bool = True
    aggressive: bool = True

    def __post_init__(self):
        if self.eta_fine < 0 or self.eta_aggr < 0:
            raise ConfigError("eta_fine and eta_aggr must be >= 0")
        if not 0 < self.threshold < 1:
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.aggressive_epochs < 1 or self.batch_size < 1:
            raise ConfigError("aggressive_epochs and batch_size must be >= 1")
        if self.xi < 0:
            raise ConfigError("xi must be >= 0")
        if self.replay not in ("batch", "single"):
            raise ConfigError(f"replay must be 'batch' or 'single', got {self.replay!r}")
        if self.se_mode not in SE_MODES:
            raise ConfigError(f"se_mode must be one of {SE_MODES}")
        if self.label_delay is not None and self.label_delay < 0:
            raise ConfigError("label_delay must be >= 0")


@dataclass
class StageLosses:
    current: float = 0.0
    replay: float = 0.0
    history: float = 0.0
    fine: float | None = None
    aggressive: float | None = None


@dataclass
class BatchRecord:
    index: int
    mse: float
    mae: float
    stage: str
    verdict: DriftVerdict | None
    losses: StageLosses


@dataclass
class OnlineResult:
    trace: MetricTrace
    records: list = field(default_factory=list)

    @property
    def drift_batches(self) -> list:
        return [r.index for r in self.records if r.verdict is not None and r.verdict.drifted]

    def drift_log(self):
        for r in self.records:
            if r.verdict is not None:
                yield r.verdict.to_record(r.stage)


def _loss(model: MGSTC, samples) -> Tensor:
    x, y = stack(samples)
    return mse_loss(model.forward(x), y)


def fine_tune_step(model: MGSTC, current, stores: ReplayStores, eta: float,
                   rng: np.random.Generator, replay_size: int | None = None) -> StageLosses:
    """One backward pass on ``L_cur + eta * L_replay``, then buffer the current samples.

    ``current`` is a list of :class:`Sample`. The replay batch holds
    ``replay_size`` (default ``len(current)``) distinct buffer samples; an
    empty buffer contributes zero loss.
    """
    out = StageLosses()
    cur = _loss(model, current)
    out.current = cur.item()
    total = cur
    if stores.buffer:
        replay = stores.sample_buffer(replay_size or len(current), rng)
        if eta > 0:
            rep = _loss(model, replay)
            out.replay = rep.item()
            total = cur + eta * rep
        else:
            with no_grad():
                out.replay = _loss(model, replay).item()
    out.fine = model.step(total)
    stores.push(current)
    return out


def aggressive_update(model: MGSTC, stores: ReplayStores, eta: float, epochs: int, xi: float,
                      batch_size: int, rng: np.random.Generator) -> StageLosses:
    """Multi-epoch retraining on the buffer plus perturbed repository draws.

    Each epoch visits the buffer once in shuffled mini-batches; every
    mini-batch is paired with an equally sized draw (with replacement) from
    the repository whose inputs get N(0, xi) noise. Afterwards the buffer is
    flushed into the repository.
    """
    out = StageLosses()
    buf = list(stores.buffer)
    for _ in range(epochs):
        order = rng.permutation(len(buf))
        for i in range(0, len(order), batch_size):
            part = [buf[j] for j in order[i : i + batch_size]]
            lb = _loss(model, part)
            out.current = lb.item()
            total = lb
            out.history = 0.0
            if stores.history:
                hist = stores.sample_history(len(part), rng)
                hx, hy = stack(hist)
                hx = augment_sample(hx, xi, rng)
                if eta > 0:
                    lh = mse_loss(model.forward(hx), hy)
                    out.history = lh.item()
                    total = lb + eta * lh
            out.aggressive = model.step(total)
    stores.flush()
    return out


class OnlineLearner:
    """Stateful stream processor.

    ``metric_scale`` (one factor per series, e.g. the normalizer's std)
    rescales errors before MSE/MAE are recorded; losses used for training and
    monitoring stay on the model's scale.
    """

    def __init__(self, model: MGSTC, config: OnlineConfig = OnlineConfig(), seed: int = 0,
                 metric_scale=None):
        self.model = model
        self.metric_scale = (None if metric_scale is None
                             else np.asarray(metric_scale, dtype=np.float64).reshape(-1, 1))
        self.config = config
        self.stores = ReplayStores(config.cap_buffer, config.cap_history)
        self.monitor = DriftMonitor(config.threshold, config.se_mode)
        self.rng = np.random.default_rng(seed)
        self.delay = model.config.horizon if config.label_delay is None else config.label_delay
        self._pending = deque()
        self._batches = 0
        self._next_step = 0
        self.last_prediction = None

    def _mature(self, now: int) -> list:
        out = []
        while self._pending and self._pending[0][0] <= now:
            out.append(self._pending.popleft()[1])
        return out

    def process_batch(self, x, y, last_steps=None) -> BatchRecord:
        """Handle one arriving batch.

        ``last_steps`` gives each window's last observed time index; it
        defaults to consecutive steps so that the labels of a window become
        usable ``label_delay`` windows later.
        """
        cfg = self.config
        idx = self._batches
        self._batches += 1
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if last_steps is None:
            last_steps = np.arange(self._next_step, self._next_step + len(x))
        self._next_step = int(last_steps[-1]) + 1
        pred = self.model.predict(x)
        err = pred - y
        per_sample = np.square(err).mean(axis=(1, 2))
        if self.metric_scale is not None:
            err = err * self.metric_scale
        batch_mse = float(np.square(err).mean())
        batch_mae = float(np.abs(err).mean())
        self.last_prediction = pred
        losses = StageLosses()
        if not cfg.online:
            return BatchRecord(idx, batch_mse, batch_mae, STAGE_FROZEN, None, losses)

        for xi, yi, li, t in zip(x, y, per_sample, last_steps):
            self._pending.append((int(t) + self.delay, Sample(xi, yi, float(li))))
        current = self._mature(int(last_steps[-1]))
        if not current:
            return BatchRecord(idx, batch_mse, batch_mae, STAGE_WAIT, None, losses)

        verdict = self.monitor.check([s.loss for s in current], self.stores.buffer_losses(), idx)
        replay_size = 1 if cfg.replay == "single" else min(len(self.stores.buffer), cfg.batch_size)
        losses = fine_tune_step(self.model, current, self.stores, cfg.eta_fine, self.rng,
                                replay_size or None)
        stage = STAGE_FINE
        if verdict.drifted and cfg.aggressive:
            agg = aggressive_update(self.model, self.stores, cfg.eta_aggr, cfg.aggressive_epochs,
                                    cfg.xi, cfg.batch_size, self.rng)
            losses.history = agg.history
            losses.aggressive = agg.aggressive
            self.monitor.reset()
            stage = STAGE_AGGRESSIVE
            log.info("batch %d: drift (z=%.3f, p=%.3g), aggressive update", idx,
                     verdict.z_statistic, verdict.p_value)
        return BatchRecord(idx, batch_mse, batch_mae, stage, verdict, losses)

    def run(self, values, max_batches: int | None = None, on_batch=None) -> OnlineResult:
        """Replay a normalized ``(time, series)`` segment as a stream of batches.

        ``on_batch(record, starts, x, y, prediction)`` is called after each batch.
        """
        mc = self.model.config
        result = OnlineResult(MetricTrace())
        for starts, x, y in batched_windows(values, mc.history, mc.horizon, self.config.batch_size):
            if max_batches is not None and len(result.records) >= max_batches:
                break
            rec = self.process_batch(x, y)
            if on_batch is not None:
                on_batch(rec, starts, x, y, self.last_prediction)
            drifted = rec.verdict is not None and rec.verdict.drifted
            result.trace.append(rec.mse, rec.mae, drifted)
            result.records.append(rec)
        return result


def online_loop(model: MGSTC, values, config: OnlineConfig = OnlineConfig(), seed: int = 0,
                max_batches: int | None = None, metric_scale=None, on_batch=None) -> OnlineResult:
    return OnlineLearner(model, config, seed, metric_scale).run(values, max_batches, on_batch)
