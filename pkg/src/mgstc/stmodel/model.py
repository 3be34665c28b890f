"""The forecasting network: chunk embedding, temporal attention over chunks,
aggregator-routed spatial attention across series, and a flatten+linear head.

Tensor layout inside ``forward``: inputs ``(B, N, T)``; chunk tokens
``(B, N, M, D)``; the spatial block sees ``(B, M, N, D)`` so that it runs at
every chunk position independently with shared weights.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionError, NumericFault
from ..numcore import Adam, Tensor, gelu, layer_norm, matmul, no_grad, relu, square
from ..segmenter import embed, positional_matrix, segment
from .attention import multi_head_attention
from .config import ModelConfig

_ATTN = ("W_Q", "W_K", "W_V")


def _xavier(rng, fan_in, fan_out, shape=None):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> dict:
    """Fresh parameters keyed by canonical name, in a fixed creation order."""
    d, m = cfg.d_model, cfg.n_chunks
    specs = [("embed.W_C", _xavier(rng, cfg.chunk_len, d))]
    for w in _ATTN:
        specs.append((f"cgta.{w}", _xavier(rng, d, d)))
    specs += [
        ("cgta.norm.gamma", np.ones(d)),
        ("cgta.norm.beta", np.zeros(d)),
        ("cgta.ffn.W_H", _xavier(rng, d, d)),
        ("cgta.ffn.b_H", np.zeros(d)),
        ("fgsa.G", rng.normal(0.0, math.sqrt(1.0 / d), size=(cfg.n_agg, d))),
    ]
    for layer in ("attn1", "attn2"):
        for w in _ATTN:
            specs.append((f"fgsa.{layer}.{w}", _xavier(rng, d, d)))
    specs += [
        ("fgsa.norm.gamma", np.ones(d)),
        ("fgsa.norm.beta", np.zeros(d)),
        ("fgsa.ffn.W_Z", _xavier(rng, d, d)),
        ("fgsa.ffn.b_Z", np.zeros(d)),
        ("decoder.W", _xavier(rng, m * d, cfg.horizon)),
        ("decoder.b", np.zeros(cfg.horizon)),
    ]
    return {name: Tensor(value, requires_grad=True, name=name) for name, value in specs}


def _activate(x: Tensor, kind: str) -> Tensor:
    return gelu(x) if kind == "gelu" else relu(x)


def _check(t: Tensor, layer: str) -> Tensor:
    if not np.isfinite(t.data).all():
        raise NumericFault(layer)
    return t


def cgta_forward(emb: Tensor, params: dict, cfg: ModelConfig, probs=None) -> Tensor:
    """Self-attention over chunk tokens, then norm and feed-forward residuals."""
    p = params
    a = multi_head_attention(emb, emb, emb, p["cgta.W_Q"], p["cgta.W_K"], p["cgta.W_V"],
                             cfg.n_heads, probs)
    h_tilde = layer_norm(a + emb, p["cgta.norm.gamma"], p["cgta.norm.beta"], cfg.norm_eps)
    ff = _activate(matmul(h_tilde, p["cgta.ffn.W_H"]) + p["cgta.ffn.b_H"], cfg.activation)
    return ff + h_tilde


def fgsa_forward(h_all: Tensor, params: dict, cfg: ModelConfig, probs=None) -> Tensor:
    """Spatial refinement over the series axis (second to last) of ``h_all``.

    The aggregator queries the N series tokens to form ``G_agg`` summary
    rows; the series tokens then query those summaries. Cost per position is
    linear in N for a fixed aggregator size.
    """
    p = params
    f = multi_head_attention(p["fgsa.G"], h_all, h_all, p["fgsa.attn1.W_Q"], p["fgsa.attn1.W_K"],
                             p["fgsa.attn1.W_V"], cfg.n_heads, probs)
    b = multi_head_attention(h_all, f, f, p["fgsa.attn2.W_Q"], p["fgsa.attn2.W_K"],
                             p["fgsa.attn2.W_V"], cfg.n_heads, probs)
    z_tilde = layer_norm(b + h_all, p["fgsa.norm.gamma"], p["fgsa.norm.beta"], cfg.norm_eps)
    ff = _activate(matmul(z_tilde, p["fgsa.ffn.W_Z"]) + p["fgsa.ffn.b_Z"], cfg.activation)
    return ff + z_tilde


def decode(z: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Flatten the trailing ``(M, D)`` token block and map it to the horizon."""
    *lead, m, d = z.shape
    return matmul(z.reshape(*lead, m * d), w) + b


def mse_loss(pred: Tensor, target) -> Tensor:
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} does not match target {target.shape}")
    return square(pred - target).mean()


def mae(pred, target) -> float:
    pred = pred.data if isinstance(pred, Tensor) else np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} does not match target {target.shape}")
    return float(np.abs(pred - target).mean())


def mse(pred, target) -> float:
    pred = pred.data if isinstance(pred, Tensor) else np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} does not match target {target.shape}")
    return float(np.square(pred - target).mean())


class MGSTC:
    """Network parameters, their optimizer state and the forward pass."""

    def __init__(self, config: ModelConfig, seed: int = 0, lr: float = 1e-4):
        self.config = config
        self.seed = seed
        self.params = init_params(config, np.random.default_rng(seed))
        self.pos = positional_matrix(config.n_chunks, config.d_model)
        self.optimizer = Adam(self.params, lr=lr)

    @property
    def lr(self) -> float:
        return self.optimizer.lr

    def trainable(self) -> dict:
        if self.config.use_fgsa:
            return self.params
        return {k: v for k, v in self.params.items() if not k.startswith("fgsa.")}

    def parameter_count(self) -> int:
        return sum(p.size for p in self.trainable().values())

    def forward(self, x, probs=None) -> Tensor:
        """Predict ``(B, N, horizon)`` from windows ``(B, N, T)``.

        A 2-D ``(N, T)`` window is treated as a batch of one.
        """
        cfg = self.config
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3 or x.shape[1:] != (cfg.n_series, cfg.history):
            raise DimensionError(
                f"expected windows of shape (B, {cfg.n_series}, {cfg.history}), got {x.shape}"
            )
        if not np.isfinite(x).all():
            raise NumericFault("input")
        p = self.params
        emb = _check(embed(segment(x, cfg.chunking), p["embed.W_C"], self.pos), "embedding")
        h = _check(cgta_forward(emb, p, cfg, probs), "cgta")
        if cfg.use_fgsa:
            z = fgsa_forward(h.swapaxes(1, 2), p, cfg, probs).swapaxes(1, 2)
            z = _check(z, "fgsa")
        else:
            z = h
        return _check(decode(z, p["decoder.W"], p["decoder.b"]), "decoder")

    __call__ = forward

    def predict(self, x) -> np.ndarray:
        with no_grad():
            return self.forward(x).data

    def step(self, loss: Tensor) -> float:
        """One backward pass and one optimizer update on ``loss``."""
        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        return loss.item()

    def state_arrays(self) -> dict:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_arrays(self, arrays: dict) -> None:
        for k, v in arrays.items():
            if self.params[k].shape != v.shape:
                raise DimensionError(f"parameter {k}: shape {v.shape} != {self.params[k].shape}")
            self.params[k].data[...] = v
