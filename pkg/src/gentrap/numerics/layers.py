"""Differentiable building blocks used by the model architectures."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DimensionError
from .tensor import (
    Tensor,
    _node,
    _sigmoid,
    add,
    matmul,
    reshape,
    softmax_lastdim,
    swapaxes,
    transpose,
)


@dataclass
class RunningStats:
    mean: np.ndarray
    var: np.ndarray
    momentum: float = 0.1

    @classmethod
    def init(cls, width: int, dtype=np.float64) -> "RunningStats":
        return cls(np.zeros(width, dtype=dtype), np.ones(width, dtype=dtype))


def batch_norm_features(x: Tensor, gamma: Tensor, beta: Tensor, mode: str = "train",
                        running: RunningStats | None = None, eps: float = 1e-5) -> Tensor:
    """Normalize each feature channel of ``[batch, time, feat]`` over (batch, time).

    Train mode uses the batch moments and folds them into ``running``;
    infer mode uses ``running`` as-is.
    """
    feat = x.shape[-1]
    if gamma.shape != (feat,) or beta.shape != (feat,):
        raise DimensionError(f"batch norm params {gamma.shape}/{beta.shape} vs feat {feat}")
    axes = tuple(range(x.ndim - 1))
    if mode == "train":
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        if running is not None:
            m = running.momentum
            running.mean[...] = (1 - m) * running.mean + m * mu
            running.var[...] = (1 - m) * running.var + m * var
    elif mode == "infer":
        if running is None:
            raise ConfigError("infer-mode batch norm needs running stats")
        mu, var = running.mean, running.var
    else:
        raise ConfigError(f"unknown batch norm mode {mode!r}")

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    out = xhat * gamma.data + beta.data
    n = x.data.size // feat

    def backward(g):
        dgamma = (g * xhat).sum(axis=axes) if gamma.requires_grad else None
        dbeta = g.sum(axis=axes) if beta.requires_grad else None
        dx = None
        if x.requires_grad:
            dxhat = g * gamma.data
            if mode == "train":
                dx = (inv_std / n) * (n * dxhat - dxhat.sum(axis=axes)
                                      - xhat * (dxhat * xhat).sum(axis=axes))
            else:
                dx = dxhat * inv_std
        return dx, dgamma, dbeta

    return _node(out, (x, gamma, beta), backward)


def conv1d_pointwise(x: Tensor, w: Tensor, bias: Tensor | None = None) -> Tensor:
    """Kernel-width-1 convolution over time: the same linear map at every step."""
    if x.shape[-1] != w.shape[0]:
        raise DimensionError(f"conv1d input {x.shape} vs kernel {w.shape}")
    y = matmul(x, w)
    return y if bias is None else add(y, bias)


def multi_head_attention(x: Tensor, heads: int, head_dim: int, params: dict[str, Tensor]) -> Tensor:
    """Scaled dot-product self-attention over the time axis of ``[batch, time, feat]``.

    ``params`` holds ``wq, wk, wv`` ([feat, heads*head_dim]), ``bq, bk, bv``,
    ``wo`` ([heads*head_dim, feat]) and ``bo``.
    """
    if heads < 1:
        raise ConfigError("heads must be >= 1")
    b, t, feat = x.shape
    width = heads * head_dim
    for key in ("wq", "wk", "wv"):
        if params[key].shape != (feat, width):
            raise ConfigError(f"attention {key} is {params[key].shape}, expected {(feat, width)}")
    if params["wo"].shape != (width, feat):
        raise ConfigError(f"attention wo is {params['wo'].shape}, expected {(width, feat)}")

    def split(z: Tensor) -> Tensor:
        return transpose(reshape(z, (b, t, heads, head_dim)), (0, 2, 1, 3))

    q = split(add(matmul(x, params["wq"]), params["bq"]))
    k = split(add(matmul(x, params["wk"]), params["bk"]))
    v = split(add(matmul(x, params["wv"]), params["bv"]))
    scores = matmul(q, swapaxes(k, -1, -2)) * (1.0 / math.sqrt(head_dim))
    attn = softmax_lastdim(scores)
    ctx = matmul(attn, v)
    merged = reshape(transpose(ctx, (0, 2, 1, 3)), (b, t, width))
    return add(matmul(merged, params["wo"]), params["bo"])


def lstm_layer(x: Tensor, params: dict[str, Tensor]) -> tuple[Tensor, Tensor]:
    """Single LSTM layer over ``[batch, time, feat]`` with zero initial state.

    ``params``: ``w_ih`` [feat, 4H], ``w_hh`` [H, 4H], ``b`` [4H]; gate order
    input, forget, cell, output. Returns (hidden sequence, last hidden state).
    """
    w_ih, w_hh, bias = params["w_ih"], params["w_hh"], params["b"]
    bsz, steps, feat = x.shape
    hidden = w_hh.shape[0]
    if w_ih.shape != (feat, 4 * hidden) or w_hh.shape != (hidden, 4 * hidden) or bias.shape != (4 * hidden,):
        raise DimensionError(
            f"lstm params {w_ih.shape}/{w_hh.shape}/{bias.shape} incompatible with input {x.shape}")
    dtype = x.data.dtype
    xw = np.matmul(x.data, w_ih.data) + bias.data
    h = np.zeros((bsz, hidden), dtype=dtype)
    c = np.zeros((bsz, hidden), dtype=dtype)
    H = hidden
    seq = np.empty((bsz, steps, hidden), dtype=dtype)
    cache = []
    for t in range(steps):
        z = xw[:, t] + h @ w_hh.data
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H:2 * H])
        g = np.tanh(z[:, 2 * H:3 * H])
        o = _sigmoid(z[:, 3 * H:])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        seq[:, t] = h
        cache.append((i, f, g, o, c_prev, tc, h_prev))

    def backward(gseq):
        dxw = np.empty_like(xw)
        dw_hh = np.zeros_like(w_hh.data)
        dh_next = np.zeros((bsz, H), dtype=dtype)
        dc_next = np.zeros((bsz, H), dtype=dtype)
        for t in reversed(range(steps)):
            i, f, g, o, c_prev, tc, h_prev = cache[t]
            dh = gseq[:, t] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dz = np.concatenate([
                dc * g * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                dc * i * (1.0 - g * g),
                do * o * (1.0 - o),
            ], axis=1)
            dc_next = dc * f
            dw_hh += h_prev.T @ dz
            dh_next = dz @ w_hh.data.T
            dxw[:, t] = dz
        flat = dxw.reshape(-1, 4 * H)
        dx = (flat @ w_ih.data.T).reshape(x.shape) if x.requires_grad else None
        dw_ih = x.data.reshape(-1, feat).T @ flat if w_ih.requires_grad else None
        db = flat.sum(axis=0) if bias.requires_grad else None
        return dx, dw_ih, (dw_hh if w_hh.requires_grad else None), db

    out = _node(seq, (x, w_ih, w_hh, bias), backward)
    return out, out[:, -1]
