"""Padding, chunking and sinusoidal position embedding for raw history windows."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DataFormatError, DimensionError
from .numcore import Tensor, matmul


@dataclass(frozen=True)
class ChunkConfig:
    history: int
    chunk_len: int
    stride: int
    d_model: int

    def __post_init__(self):
        validate_chunking(self.history, self.chunk_len, self.stride)
        if self.d_model <= 0 or self.d_model % 2:
            raise ConfigError(f"d_model must be a positive even number, got {self.d_model}")

    @property
    def n_chunks(self) -> int:
        return count_chunks(self.history, self.chunk_len, self.stride)


def validate_chunking(history: int, chunk_len: int, stride: int) -> None:
    if not 0 < stride <= chunk_len <= history:
        raise ConfigError(
            f"chunking needs 0 < stride <= chunk_len <= history, got "
            f"stride={stride}, chunk_len={chunk_len}, history={history}"
        )


def count_chunks(history: int, chunk_len: int, stride: int) -> int:
    validate_chunking(history, chunk_len, stride)
    return (history - chunk_len) // stride + 2


def pad_series(x, stride: int) -> np.ndarray:
    """Append ``stride`` copies of the last value along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] == 0:
        raise DataFormatError("cannot pad an empty series")
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    tail = np.repeat(x[..., -1:], stride, axis=-1)
    return np.concatenate([x, tail], axis=-1)


def chunk_offsets(history: int, chunk_len: int, stride: int) -> np.ndarray:
    m = count_chunks(history, chunk_len, stride)
    return np.arange(m) * stride


def segment(x, cfg: ChunkConfig) -> np.ndarray:
    """Chunk matrix of shape ``(..., M, C)`` from series of shape ``(..., T)``.

    Works on any leading batch/series axes; each series is chunked on its own.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != cfg.history:
        raise DimensionError(f"series length {x.shape[-1]} does not match history {cfg.history}")
    padded = pad_series(x, cfg.stride)
    idx = chunk_offsets(cfg.history, cfg.chunk_len, cfg.stride)[:, None] + np.arange(cfg.chunk_len)
    return padded[..., idx]


def stitch(chunks: np.ndarray, history: int, stride: int) -> np.ndarray:
    """Rebuild the padded series from its chunk matrix.

    Positions past the last chunk are padding, so they repeat the last
    reconstructed value.
    """
    m, c = chunks.shape[-2:]
    out = np.empty(chunks.shape[:-2] + (history + stride,))
    end = 0
    for k in range(m):
        start = k * stride
        out[..., start : start + c] = chunks[..., k, :]
        end = start + c
    out[..., end:] = out[..., end - 1 : end]
    return out


@lru_cache(maxsize=32)
def _positional(m: int, d: int) -> np.ndarray:
    pos = np.arange(m, dtype=np.float64)[:, None]
    i2 = np.arange(0, d, 2, dtype=np.float64)
    angle = pos / np.power(10000.0, i2 / d)
    p = np.empty((m, d))
    p[:, 0::2] = np.sin(angle)
    p[:, 1::2] = np.cos(angle)
    p.setflags(write=False)
    return p


def positional_matrix(m: int, d: int) -> Tensor:
    if d <= 0 or d % 2:
        raise ConfigError(f"positional embedding needs an even dimension, got {d}")
    return Tensor(_positional(m, d))


def embed(chunks, w_c: Tensor, pos: Tensor) -> Tensor:
    """``chunks @ W_C + P``; gradient flows to ``W_C`` only."""
    chunks = chunks if isinstance(chunks, Tensor) else Tensor(chunks)
    if pos.shape != (chunks.shape[-2], w_c.shape[-1]):
        raise DimensionError(
            f"positional matrix {pos.shape} does not match chunks {chunks.shape} and W_C {w_c.shape}"
        )
    return matmul(chunks, w_c) + pos
