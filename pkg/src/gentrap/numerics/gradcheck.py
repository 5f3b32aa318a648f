"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckReport:
    max_rel_error: float
    passed: bool
    analytic: np.ndarray
    numeric: np.ndarray

    def __str__(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return f"grad_check {verdict}: max rel err {self.max_rel_error:.3e}"


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    # entries where both gradients are below ``floor`` are compared absolutely
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numeric_gradient(f: Callable[[Tensor], Tensor], x: np.ndarray, h: float = 1e-4,
                     indices: np.ndarray | None = None) -> np.ndarray:
    """Central differences; only the flat positions in ``indices`` if given (others stay 0)."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in (range(flat.size) if indices is None else indices):
        orig = flat[i]
        flat[i] = orig + h
        up = float(f(Tensor(x.copy())).data)
        flat[i] = orig - h
        down = float(f(Tensor(x.copy())).data)
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return grad


def grad_check(f: Callable[[Tensor], Tensor], x, tolerance: float = 1e-5,
               h: float = 1e-4, floor: float = 1e-6, indices=None) -> GradCheckReport:
    """Compare the reverse-mode gradient of scalar ``f`` at ``x`` with central differences.

    ``indices`` restricts the comparison to a subset of flat positions, which
    keeps checks on large parameter tensors affordable.
    """
    x = np.array(x, dtype=np.float64)
    xt = Tensor(x.copy(), requires_grad=True)
    out = f(xt)
    out.backward()
    analytic = xt.grad if xt.grad is not None else np.zeros_like(x)
    if indices is None:
        numeric = numeric_gradient(f, x, h)
        err = float(relative_error(analytic, numeric, floor).max()) if x.size else 0.0
        return GradCheckReport(err, err < tolerance, analytic, numeric)
    indices = np.asarray(indices, dtype=np.int64)
    numeric = numeric_gradient(f, x, h, indices).reshape(-1)[indices]
    picked = np.asarray(analytic).reshape(-1)[indices]
    err = float(relative_error(picked, numeric, floor).max()) if indices.size else 0.0
    return GradCheckReport(err, err < tolerance, picked, numeric)
