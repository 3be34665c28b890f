"""JSON checkpoint container.

Arrays are stored as base64 little-endian float64 blobs so a save/load cycle
is bit-exact and the file bytes depend only on the model state.
"""
from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from ..errors import DataFormatError
from .config import ModelConfig
from .model import MGSTC

FORMAT = "mgstc-checkpoint"
VERSION = 1


def _encode(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).astype(np.float64)


def to_dict(model: MGSTC, extra: dict | None = None) -> dict:
    opt = model.optimizer
    return {
        "format": FORMAT,
        "version": VERSION,
        "config": model.config.to_dict(),
        "seed": model.seed,
        "params": {k: _encode(p.data) for k, p in model.params.items()},
        "adam": {
            k: {
                "step_count": s.step_count,
                "lr": s.lr,
                "beta1": s.beta1,
                "beta2": s.beta2,
                "epsilon": s.epsilon,
                "first_moment": _encode(s.first_moment),
                "second_moment": _encode(s.second_moment),
            }
            for k, s in opt.states.items()
        },
        "extra": extra or {},
    }


def from_dict(d: dict) -> tuple[MGSTC, dict]:
    if d.get("format") != FORMAT:
        raise DataFormatError(f"not a checkpoint file (format={d.get('format')!r})")
    if d.get("version") != VERSION:
        raise DataFormatError(f"unsupported checkpoint version {d.get('version')}")
    cfg = ModelConfig.from_dict(d["config"])
    model = MGSTC(cfg, seed=d["seed"])
    missing = set(model.params) ^ set(d["params"])
    if missing:
        raise DataFormatError(f"checkpoint parameter names differ: {sorted(missing)}")
    model.load_arrays({k: _decode(v) for k, v in d["params"].items()})
    for k, s in d.get("adam", {}).items():
        st = model.optimizer.states[k]
        st.step_count = s["step_count"]
        st.lr, st.beta1, st.beta2, st.epsilon = s["lr"], s["beta1"], s["beta2"], s["epsilon"]
        st.first_moment[...] = _decode(s["first_moment"])
        st.second_moment[...] = _decode(s["second_moment"])
    if model.optimizer.states:
        model.optimizer.lr = next(iter(model.optimizer.states.values())).lr
    return model, d.get("extra", {})


def save(model: MGSTC, path, extra: dict | None = None) -> None:
    Path(path).write_text(json.dumps(to_dict(model, extra), sort_keys=True))


def load(path) -> tuple[MGSTC, dict]:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid checkpoint JSON ({exc})") from exc
    return from_dict(d)
