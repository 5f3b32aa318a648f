"""Reusable pieces: transformer encoder, LSTM stack, feed-forward stack, set aggregation."""

from __future__ import annotations

import numpy as np

from ..errors import PreconditionError
from ..numerics import (
    Tensor,
    add,
    batch_norm_features,
    conv1d_pointwise,
    global_average_pool_time,
    index,
    linear,
    lstm_layer,
    max_over_axis,
    multi_head_attention,
    relu,
    reshape,
    stack,
)
from .base import Model
from .config import TransformerConfig


def register_transformer(model: Model, prefix: str, cfg: TransformerConfig) -> None:
    for b in range(cfg.blocks):
        p = f"{prefix}.block{b}"
        width = cfg.heads * cfg.head_dim
        model._batch_norm(f"{p}.bn1", cfg.feat_width)
        for key in ("wq", "wk", "wv"):
            model._add(f"{p}.attn.{key}", model._glorot(cfg.feat_width, width))
            model._add(f"{p}.attn.b{key[1]}", np.zeros(width))
        model._add(f"{p}.attn.wo", model._glorot(width, cfg.feat_width))
        model._add(f"{p}.attn.bo", np.zeros(cfg.feat_width))
        model._batch_norm(f"{p}.bn2", cfg.feat_width)
        fan_in = cfg.feat_width
        for j, w in enumerate(cfg.conv_widths):
            model._dense(f"{p}.conv{j}", fan_in, w)
            fan_in = w


def transformer_block(model: Model, prefix: str, x: Tensor, cfg: TransformerConfig) -> Tensor:
    """Two residual sub-modules: norm -> attention, then norm -> pointwise conv stack."""
    bn1, bn2 = model.group(f"{prefix}.bn1"), model.group(f"{prefix}.bn2")
    h = batch_norm_features(x, bn1["gamma"], bn1["beta"], model.bn_mode, model.buffers[f"{prefix}.bn1"])
    x = add(x, multi_head_attention(h, cfg.heads, cfg.head_dim, model.group(f"{prefix}.attn")))
    h = batch_norm_features(x, bn2["gamma"], bn2["beta"], model.bn_mode, model.buffers[f"{prefix}.bn2"])
    last = len(cfg.conv_widths) - 1
    for j in range(len(cfg.conv_widths)):
        conv = model.group(f"{prefix}.conv{j}")
        h = conv1d_pointwise(h, conv["w"], conv["b"])
        if j < last:
            h = relu(h)
    return add(x, h)


def transformer_encode(model: Model, prefix: str, x: Tensor, cfg: TransformerConfig) -> Tensor:
    for b in range(cfg.blocks):
        x = transformer_block(model, f"{prefix}.block{b}", x, cfg)
    return x


def register_ff(model: Model, prefix: str, fan_in: int, widths) -> None:
    for j, w in enumerate(widths):
        model._dense(f"{prefix}.fc{j}", fan_in, w)
        fan_in = w


def feed_forward(model: Model, prefix: str, x: Tensor, n_layers: int, final_relu: bool = False) -> Tensor:
    for j in range(n_layers):
        fc = model.group(f"{prefix}.fc{j}")
        x = linear(x, fc["w"], fc["b"])
        if j < n_layers - 1 or final_relu:
            x = relu(x)
    return x


def register_lstm_stack(model: Model, prefix: str, fan_in: int, widths) -> None:
    for j, w in enumerate(widths):
        model._lstm(f"{prefix}.lstm{j}", fan_in, w)
        fan_in = w


def lstm_stack(model: Model, prefix: str, x: Tensor, n_layers: int) -> tuple[Tensor, Tensor]:
    last = None
    for j in range(n_layers):
        x, last = lstm_layer(x, model.group(f"{prefix}.lstm{j}"))
    return x, last


def check_k(k: int, available: int) -> None:
    if not 1 <= k <= available:
        raise PreconditionError(f"k={k} outside 1..{available}")


def encode_pairs(pairs: Tensor, k: int, encoder, joint: bool = True) -> Tensor:
    """Apply ``encoder`` ([n, time, feat] -> [n, d]) to the first ``k`` pairs of ``[b, K, time, feat]``.

    ``joint`` encodes all pairs in one batch, which training needs so batch
    norm sees every pair. Otherwise each slot is encoded as its own
    ``[b, time, feat]`` batch, so a pair's embedding never depends on k
    through batch-shape-dependent rounding. Returns ``[b, k, d]``.
    """
    b, available, t, f = pairs.shape
    check_k(k, available)
    if not joint:
        return stack([encoder(index(pairs, (slice(None), j))) for j in range(k)], axis=1)
    sel = pairs if k == available else pairs[:, :k]
    emb = encoder(reshape(sel, (b * k, t, f)))
    return reshape(emb, (b, k, emb.shape[-1]))


def aggregate_max(pair_embeddings: Tensor) -> Tensor:
    """Elementwise max over the pair axis of ``[b, k, d]``."""
    if pair_embeddings.shape[1] == 1:
        return reshape(pair_embeddings, (pair_embeddings.shape[0], pair_embeddings.shape[2]))
    return max_over_axis(pair_embeddings, axis=1)


def transformer_pair_encoder(model: Model, prefix: str, cfg: TransformerConfig):
    def encode(x: Tensor) -> Tensor:
        return global_average_pool_time(transformer_encode(model, prefix, x, cfg))
    return encode
