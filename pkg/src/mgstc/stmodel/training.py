"""Offline training with early stopping on validation MSE."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..datastream.windows import window_batch, window_starts
from ..numcore import no_grad
from .model import MGSTC, mse_loss

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    best_epoch: int
    best_val_mse: float
    initial_val_mse: float
    steps: int
    history: list = field(default_factory=list)


def evaluate_mse(model: MGSTC, values: np.ndarray, batch_size: int = 64, stride: int = 1) -> float:
    """Mean squared error over every window of ``values`` (time-major)."""
    cfg = model.config
    starts = window_starts(len(values), cfg.history, cfg.horizon, stride)
    total, count = 0.0, 0
    with no_grad():
        for i in range(0, len(starts), batch_size):
            x, y = window_batch(values, starts[i : i + batch_size], cfg.history, cfg.horizon)
            diff = model.forward(x).data - y
            total += float(np.square(diff).sum())
            count += diff.size
    return total / count


def _snapshot(model: MGSTC):
    opt = {k: (s.first_moment.copy(), s.second_moment.copy(), s.step_count)
           for k, s in model.optimizer.states.items()}
    return model.state_arrays(), opt


def _restore(model: MGSTC, snap) -> None:
    arrays, opt = snap
    model.load_arrays(arrays)
    for k, (m, v, t) in opt.items():
        s = model.optimizer.states[k]
        s.first_moment[...] = m
        s.second_moment[...] = v
        s.step_count = t


def train_offline(model: MGSTC, train_values, val_values, *, epochs: int = 50, patience: int = 3,
                  batch_size: int = 16, stride: int = 1, seed: int = 0,
                  max_steps: int | None = None, callback=None) -> TrainResult:
    """Mini-batch Adam over shuffled training windows.

    Validation MSE is measured before the first epoch and after each one; the
    best state (the untrained one included) is restored at the end, so the
    selected model never validates worse than the initial one. Training
    stops after ``patience`` epochs without improvement, after ``epochs``
    epochs, or once ``max_steps`` updates have been made.
    """
    cfg = model.config
    train_values = np.asarray(train_values, dtype=np.float64)
    val_values = np.asarray(val_values, dtype=np.float64)
    rng = np.random.default_rng(seed)
    starts = window_starts(len(train_values), cfg.history, cfg.horizon, stride)

    initial = evaluate_mse(model, val_values)
    best, best_epoch, snap = initial, 0, _snapshot(model)
    history = [{"epoch": 0, "train_mse": None, "val_mse": initial}]
    steps, stale = 0, 0
    for epoch in range(1, epochs + 1):
        order = rng.permutation(starts)
        losses = []
        for i in range(0, len(order), batch_size):
            x, y = window_batch(train_values, order[i : i + batch_size], cfg.history, cfg.horizon)
            losses.append(model.step(mse_loss(model.forward(x), y)))
            steps += 1
            if max_steps is not None and steps >= max_steps:
                break
        val = evaluate_mse(model, val_values)
        row = {"epoch": epoch, "train_mse": float(np.mean(losses)), "val_mse": val}
        history.append(row)
        log.info("epoch %d train_mse=%.6f val_mse=%.6f", epoch, row["train_mse"], val)
        if callback is not None:
            callback(row)
        if val < best:
            best, best_epoch, snap, stale = val, epoch, _snapshot(model), 0
        else:
            stale += 1
        if stale >= patience or (max_steps is not None and steps >= max_steps):
            break
    _restore(model, snap)
    return TrainResult(best_epoch, best, initial, steps, history)
