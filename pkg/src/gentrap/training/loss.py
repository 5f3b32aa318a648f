"""Class-weighted binary cross-entropy."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..numerics import Tensor, as_tensor, clip, index, log, log_softmax_lastdim, mean, mul, add

CLAMP = 1e-12
# documented class ratios for the two deployments the method was built for
LAMBDA_PRESETS = {"rural": 0.003, "urban": 0.0006}


def _check_lambda(lam: float) -> None:
    if not 0.0 < lam < 1.0:
        raise ConfigError(f"lambda must lie in (0, 1), got {lam}")


def class_ratio_lambda(labels) -> float:
    """Failures divided by non-failures."""
    y = np.asarray(labels)
    pos = int((y == 1).sum())
    neg = int((y == 0).sum())
    if pos == 0 or neg == 0:
        raise ConfigError(f"cannot derive lambda from {pos} failures and {neg} non-failures")
    return pos / neg


def weighted_cross_entropy(y, y_hat: Tensor, lam: float) -> Tensor:
    """Mean of ``-y log(p) (1 - lam) - (1 - y) log(1 - p) lam`` with ``p`` clamped to [1e-12, 1 - 1e-12].

    The rare positive class is scaled by ``1 - lam`` and the common negative
    class by ``lam``.
    """
    _check_lambda(lam)
    y_hat = as_tensor(y_hat)
    y = np.asarray(y, dtype=y_hat.dtype)
    p = clip(y_hat, CLAMP, 1.0 - CLAMP)
    pos = mul(log(p), -(1.0 - lam) * y)
    neg = mul(log(1.0 - p), -lam * (1.0 - y))
    return mean(add(pos, neg))


def logits_weighted_cross_entropy(logits: Tensor, y, lam: float) -> Tensor:
    """Same loss evaluated from 2-way logits (column 1 = failure) via log-softmax."""
    _check_lambda(lam)
    y = np.asarray(y, dtype=logits.dtype)
    ls = log_softmax_lastdim(logits)
    pos = mul(index(ls, (slice(None), 1)), -(1.0 - lam) * y)
    neg = mul(index(ls, (slice(None), 0)), -lam * (1.0 - y))
    return mean(add(pos, neg))
