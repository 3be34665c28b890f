"""Run configuration: flat ``key = value`` files plus command-line overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .datastream.split import SplitSpec
from .errors import ConfigError
from .online.learner import OnlineConfig
from .stmodel.config import ModelConfig

MODEL_FIELDS = ("history", "chunk_len", "stride", "d_model", "horizon", "n_heads", "n_agg",
                "activation", "use_fgsa")


@dataclass
class RunConfig:
    # network
    history: int = 128
    chunk_len: int = 48
    stride: int = 32
    d_model: int = 512
    horizon: int = 60
    n_heads: int = 8
    n_agg: int = 10
    activation: str = "gelu"
    use_fgsa: bool = True
    # offline training
    split: str = "5:2:55"
    lr: float = 1e-4
    batch_size: int = 16
    epochs: int = 50
    patience: int = 3
    train_stride: int = 1
    smoothing: float = 0.0
    # online strategy
    eta_fine: float = 0.5
    eta_aggr: float = 0.5
    threshold: float = 0.05
    cap_buffer: int = 100
    cap_history: int = 256
    aggressive_epochs: int = 5
    xi: float = 0.0025
    replay: str = "batch"
    label_delay: int = -1
    se_mode: str = "two_sample"
    aggressive: bool = True
    denormalize_metrics: bool = False
    seed: int = 0

    def validate(self, n_series: int = 1) -> None:
        """Raise :class:`ConfigError` on any invalid field; touches no data."""
        self.model_config(n_series)
        self.online_config()
        self.split_spec()
        for name in ("lr",):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("batch_size", "epochs", "patience", "train_stride"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0 <= self.smoothing <= 1:
            raise ConfigError("smoothing must lie in [0, 1] (0 disables it)")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def model_config(self, n_series: int) -> ModelConfig:
        return ModelConfig(n_series=n_series, **{k: getattr(self, k) for k in MODEL_FIELDS})

    def online_config(self, online: bool = True) -> OnlineConfig:
        return OnlineConfig(
            eta_fine=self.eta_fine, eta_aggr=self.eta_aggr, threshold=self.threshold,
            cap_buffer=self.cap_buffer, cap_history=self.cap_history,
            aggressive_epochs=self.aggressive_epochs, xi=self.xi, batch_size=self.batch_size,
            replay=self.replay, label_delay=None if self.label_delay < 0 else self.label_delay,
            se_mode=self.se_mode, online=online, aggressive=self.aggressive,
        )

    def split_spec(self) -> SplitSpec:
        return SplitSpec.parse(self.split)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def updated(self, values: dict) -> "RunConfig":
        known = {f.name: f for f in fields(self)}
        out = dataclasses.replace(self)
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown config field {key!r}")
            setattr(out, key, _coerce(key, known[key].type, raw))
        return out


def _coerce(key: str, typ, raw):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if typ in (bool, "bool"):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if typ in (int, "int"):
            return int(text)
        if typ in (float, "float"):
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"field {key!r}: cannot parse {raw!r} as {typ}") from exc
    return text


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"config file {path}: {exc.strerror}") from exc
        cfg = cfg.updated(parse_config_text(text, str(path)))
    if overrides:
        cfg = cfg.updated(overrides)
    return cfg


def dump_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {str(v).lower() if isinstance(v, bool) else v}\n"
                   for k, v in cfg.to_dict().items())
