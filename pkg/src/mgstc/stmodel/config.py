from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import ConfigError
from ..segmenter import ChunkConfig, count_chunks

ACTIVATIONS = ("gelu", "relu")


@dataclass(frozen=True)
class ModelConfig:
    """Shape hyperparameters of the network.

    Defaults follow the published full-scale setting; desk-scale runs
    override ``d_model`` (and usually ``history``/``horizon``).
    """

    n_series: int
    history: int = 128
    chunk_len: int = 48
    stride: int = 32
    d_model: int = 512
    horizon: int = 60
    n_heads: int = 8
    n_agg: int = 10
    activation: str = "gelu"
    norm_eps: float = 1e-5
    use_fgsa: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_series < 1:
            raise ConfigError(f"n_series must be >= 1, got {self.n_series}")
        ChunkConfig(self.history, self.chunk_len, self.stride, self.d_model)
        if self.n_heads < 1 or self.d_model % self.n_heads:
            raise ConfigError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        if self.n_agg < 1:
            raise ConfigError(f"n_agg must be >= 1, got {self.n_agg}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if self.norm_eps <= 0:
            raise ConfigError("norm_eps must be positive")

    @property
    def n_chunks(self) -> int:
        return count_chunks(self.history, self.chunk_len, self.stride)

    @property
    def d_k(self) -> int:
        return self.d_model // self.n_heads

    @property
    def chunking(self) -> ChunkConfig:
        return ChunkConfig(self.history, self.chunk_len, self.stride, self.d_model)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)
