"""Multi-head scaled dot-product attention on autodiff tensors.

Leading axes broadcast, so a single query matrix (the aggregator) can attend
over a whole batch of key/value sets without being tiled.
"""
from __future__ import annotations

import math

from ..errors import DimensionError
from ..numcore import Tensor, flops, matmul, softmax


def split_heads(x: Tensor, n_heads: int) -> Tensor:
    *lead, a, d = x.shape
    return x.reshape(*lead, a, n_heads, d // n_heads).swapaxes(-2, -3)


def merge_heads(x: Tensor) -> Tensor:
    *lead, h, a, dk = x.shape
    return x.swapaxes(-2, -3).reshape(*lead, a, h * dk)


def multi_head_attention(query, key, value, w_q, w_k, w_v, n_heads, probs=None):
    """Concatenated heads of ``softmax(Q K^T / sqrt(d_k)) V``.

    ``query`` is ``(..., a, D)``, ``key``/``value`` are ``(..., b, D)``.
    There is no output projection; the head results are concatenated
    back to width ``D``. If ``probs`` is a list, the attention probability
    array ``(..., H, a, b)`` is appended to it.
    """
    d = query.shape[-1]
    if key.shape[-1] != d or value.shape[-1] != d or key.shape[-2] != value.shape[-2]:
        raise DimensionError(
            f"attention operands disagree: query {query.shape}, key {key.shape}, value {value.shape}"
        )
    if d % n_heads:
        raise DimensionError(f"width {d} is not divisible by {n_heads} heads")
    d_k = d // n_heads
    with flops.category("projection"):
        q = split_heads(matmul(query, w_q), n_heads)
        k = split_heads(matmul(key, w_k), n_heads)
        v = split_heads(matmul(value, w_v), n_heads)
    with flops.category("attention"):
        scores = matmul(q, k.swapaxes(-1, -2)) * (1.0 / math.sqrt(d_k))
        p = softmax(scores)
        out = matmul(p, v)
    if probs is not None:
        probs.append(p.data)
    return merge_heads(out)
