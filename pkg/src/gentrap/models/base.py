"""Parameter container shared by all architectures."""

from __future__ import annotations

import numpy as np

from ..numerics import RunningStats, Tensor, load_checkpoint, save_checkpoint
from ..errors import DataError


class Model:
    """Named parameters, batch-norm buffers and a train/infer switch.

    Subclasses register parameters through ``_dense``/``_vector``/``_lstm``
    in a fixed order so that a seed fully determines initial values.
    """

    tag = "model"
    kind = "classifier"   # or "autoencoder"

    def __init__(self, seed: int = 0, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.params: dict[str, Tensor] = {}
        self.buffers: dict[str, RunningStats] = {}
        self.training = True
        self._rng = np.random.default_rng(seed)

    # -- registration ------------------------------------------------------
    def _add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter {name!r}")
        t = Tensor(value.astype(self.dtype), requires_grad=True, name=name)
        self.params[name] = t
        return t

    def _glorot(self, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return self._rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))

    def _dense(self, prefix: str, fan_in: int, fan_out: int) -> None:
        self._add(f"{prefix}.w", self._glorot(fan_in, fan_out))
        self._add(f"{prefix}.b", np.zeros(fan_out))

    def _vector(self, name: str, value: np.ndarray) -> None:
        self._add(name, np.asarray(value, dtype=float))

    def _lstm(self, prefix: str, fan_in: int, hidden: int) -> None:
        self._add(f"{prefix}.w_ih", self._glorot(fan_in, 4 * hidden))
        self._add(f"{prefix}.w_hh", self._glorot(hidden, 4 * hidden))
        bias = np.zeros(4 * hidden)
        bias[hidden:2 * hidden] = 1.0   # forget gate starts open
        self._add(f"{prefix}.b", bias)

    def _batch_norm(self, prefix: str, width: int) -> None:
        self._vector(f"{prefix}.gamma", np.ones(width))
        self._vector(f"{prefix}.beta", np.zeros(width))
        self.buffers[prefix] = RunningStats.init(width, self.dtype)

    def group(self, prefix: str) -> dict[str, Tensor]:
        """Parameters under ``prefix.`` keyed by their last name component."""
        n = len(prefix) + 1
        return {k[n:]: v for k, v in self.params.items() if k.startswith(prefix + ".") and "." not in k[n:]}

    # -- modes -------------------------------------------------------------
    def train(self) -> "Model":
        self.training = True
        return self

    def eval(self) -> "Model":
        self.training = False
        return self

    @property
    def bn_mode(self) -> str:
        return "train" if self.training else "infer"

    def n_parameters(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    # -- persistence -------------------------------------------------------
    def state_dict(self) -> dict[str, np.ndarray]:
        out = {name: p.data.copy() for name, p in self.params.items()}
        for name, rs in self.buffers.items():
            out[f"{name}#running_mean"] = rs.mean.copy()
            out[f"{name}#running_var"] = rs.var.copy()
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        expected = set(self.state_dict())
        got = set(state)
        if expected != got:
            raise DataError(f"checkpoint mismatch: missing {sorted(expected - got)}, "
                            f"unexpected {sorted(got - expected)}")
        for name, p in self.params.items():
            if state[name].shape != p.shape:
                raise DataError(f"{name}: checkpoint shape {state[name].shape} vs model {p.shape}")
            p.data = state[name].astype(self.dtype).copy()
        for name, rs in self.buffers.items():
            rs.mean = state[f"{name}#running_mean"].astype(self.dtype).copy()
            rs.var = state[f"{name}#running_var"].astype(self.dtype).copy()

    def save(self, path):
        return save_checkpoint(path, self.state_dict())

    def load(self, path) -> "Model":
        self.load_state_dict(load_checkpoint(path))
        return self
