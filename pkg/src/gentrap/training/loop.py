"""Minibatch training with the variable-k policy, early stopping and AE thresholding."""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..dataset import Batch
from ..errors import ConfigError, PreconditionError, ThresholdError, TrainingDivergence
from ..models import Model
from ..numerics import AdamState, adam_step, no_grad, softmax_lastdim
from .loss import class_ratio_lambda, logits_weighted_cross_entropy
from .metrics import MetricsReport

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 1024
    epochs: int = 50
    learning_rate: float = 1e-3
    patience: int = 10
    seed: int = 0
    max_k: int = 3
    k_policy: str = "uniform"        # "uniform" draws k in 1..max_k per minibatch, "fixed" always uses max_k
    lambda_override: float | None = None
    eval_batch_size: int = 4096

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1 or self.patience < 1:
            raise ConfigError("batch_size, epochs and patience must be positive")
        if self.k_policy not in ("uniform", "fixed"):
            raise ConfigError(f"unknown k_policy {self.k_policy!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def check_batch_size(batch_size: int, lam: float) -> None:
    """Warn when a minibatch would hold fewer than two failures on average."""
    expected = batch_size * lam / (1.0 + lam)
    if expected < 2.0:
        log.warning("batch size %d gives %.2f expected failures per batch (< 2)", batch_size, expected)


def draw_k(rng: np.random.Generator, max_k: int, policy: str = "uniform") -> int:
    return int(rng.integers(1, max_k + 1)) if policy == "uniform" else max_k


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    val_precision: float
    val_recall: float
    val_f1: float
    k_counts: dict[int, int] = field(default_factory=dict)


@dataclass
class TrainResult:
    model: Model
    trace: list[EpochRecord]
    best_epoch: int
    lam: float | None = None
    threshold: float | None = None
    k_draws: list[int] = field(default_factory=list)

    def trace_rows(self) -> list[dict]:
        return [{"epoch": r.epoch, "loss": r.loss, "val_precision": r.val_precision,
                 "val_recall": r.val_recall, "val_f1": r.val_f1} for r in self.trace]


def _batches(n: int, size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, size):
        yield order[start:start + size]


def predict_proba(model: Model, batch: Batch, k: int | None = None, chunk: int = 4096) -> np.ndarray:
    """Failure probability per sample (column 1 of the softmax), inference mode."""
    was = model.training
    model.eval()
    out = []
    with no_grad():
        for s in range(0, len(batch), chunk):
            part = batch.take(np.arange(s, min(s + chunk, len(batch))))
            out.append(softmax_lastdim(model.logits(part, k)).data[:, 1])
    model.training = was
    return np.concatenate(out) if out else np.zeros(0)


def reconstruction_errors(model: Model, batch: Batch, k: int | None = None, chunk: int = 4096) -> np.ndarray:
    was = model.training
    model.eval()
    out = []
    with no_grad():
        for s in range(0, len(batch), chunk):
            part = batch.take(np.arange(s, min(s + chunk, len(batch))))
            out.append(model.reconstruction_error(part, k).data)
    model.training = was
    return np.concatenate(out) if out else np.zeros(0)


def predict(model: Model, batch: Batch, threshold: float | None = None, k: int | None = None) -> np.ndarray:
    """Binary failure prediction: softmax argmax, or error above ``threshold`` for autoencoders."""
    if model.kind == "autoencoder":
        if threshold is None:
            raise PreconditionError("autoencoder prediction needs a threshold")
        return (reconstruction_errors(model, batch, k) > threshold).astype(np.int8)
    p = predict_proba(model, batch, k)
    # argmax over (normal, failure); ties go to the first column
    return (p > 0.5).astype(np.int8)


def evaluate(model: Model, batch: Batch, threshold: float | None = None, k: int | None = None,
             fold: int | None = None) -> MetricsReport:
    if len(batch) == 0:
        raise PreconditionError("cannot evaluate on an empty sample set")
    return MetricsReport.from_predictions(batch.labels, predict(model, batch, threshold, k), model.tag, fold)


def _finite_or_abort(loss: float, epoch: int, step: int, trace: list[EpochRecord]) -> None:
    if not math.isfinite(loss):
        raise TrainingDivergence(f"non-finite loss {loss} at epoch {epoch}, step {step}", trace)


def train(model: Model, train_batch: Batch, val_batch: Batch, cfg: TrainConfig) -> TrainResult:
    """Fit a classifier; keeps the parameters of the epoch with the best validation macro-F1."""
    if model.kind != "classifier":
        raise PreconditionError(f"{model.tag} is not a classifier; use fit_ae_and_threshold")
    if len(train_batch) == 0:
        raise PreconditionError("empty training set")
    lam = cfg.lambda_override if cfg.lambda_override is not None else class_ratio_lambda(train_batch.labels)
    check_batch_size(cfg.batch_size, lam)
    rng = np.random.default_rng(cfg.seed)
    state = AdamState(learning_rate=cfg.learning_rate)
    uses_k = model.tag in ("gentrap", "gen_lstmplus")
    trace: list[EpochRecord] = []
    draws: list[int] = []
    best_f1, best_epoch, best_state, stale = -1.0, 0, None, 0
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        total, seen, counts = 0.0, 0, {}
        for step, idx in enumerate(_batches(len(train_batch), cfg.batch_size, rng)):
            k = draw_k(rng, cfg.max_k, cfg.k_policy) if uses_k else cfg.max_k
            draws.append(k)
            counts[k] = counts.get(k, 0) + 1
            mb = train_batch.take(idx)
            loss = logits_weighted_cross_entropy(model.logits(mb, k), mb.labels, lam)
            value = float(loss.data)
            _finite_or_abort(value, epoch, step, trace)
            loss.backward()
            adam_step(model.params, state)
            total += value * len(idx)
            seen += len(idx)
        m = evaluate(model, val_batch, k=cfg.max_k if uses_k else None)
        trace.append(EpochRecord(epoch, total / seen, m.precision, m.recall, m.f1, counts))
        log.info("%s epoch %d loss %.6f val F1 %.4f", model.tag, epoch, total / seen, m.f1)
        if m.f1 > best_f1:
            best_f1, best_epoch, best_state, stale = m.f1, epoch, copy.deepcopy(model.state_dict()), 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.load_state_dict(best_state)
    model.eval()
    return TrainResult(model, trace, best_epoch, lam, k_draws=draws)


def choose_threshold(errors: np.ndarray, labels: np.ndarray, n_candidates: int = 1001) -> tuple[float, float]:
    """Threshold over validation error quantiles that maximizes macro-F1; returns (threshold, F1)."""
    labels = np.asarray(labels)
    if labels.min() == labels.max():
        raise ThresholdError("validation set must contain both failures and non-failures")
    candidates = np.unique(np.quantile(errors, np.linspace(0.0, 1.0, n_candidates)))
    best_t, best_f = float(candidates[0]), -1.0
    for t in candidates:
        f = MetricsReport.from_predictions(labels, errors > t).f1
        if f > best_f:
            best_t, best_f = float(t), f
    return best_t, best_f


def fit_ae_and_threshold(model: Model, train_batch: Batch, val_batch: Batch, cfg: TrainConfig) -> TrainResult:
    """Train an autoencoder on normal samples only, then pick the error threshold on validation.

    Early stopping tracks the mean reconstruction error of the normal
    validation samples.
    """
    if model.kind != "autoencoder":
        raise PreconditionError(f"{model.tag} is not an autoencoder")
    normal = train_batch.take(np.flatnonzero(train_batch.labels == 0))
    if len(normal) == 0:
        raise PreconditionError("no normal samples to train the autoencoder on")
    if val_batch.labels.min() == val_batch.labels.max():
        raise ThresholdError("validation set must contain both failures and non-failures")
    val_normal = val_batch.take(np.flatnonzero(val_batch.labels == 0))
    rng = np.random.default_rng(cfg.seed)
    state = AdamState(learning_rate=cfg.learning_rate)
    uses_k = model.tag == "gnn_lstmae"
    trace: list[EpochRecord] = []
    draws: list[int] = []
    best, best_epoch, best_state, stale = math.inf, 0, None, 0
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        total, seen, counts = 0.0, 0, {}
        for step, idx in enumerate(_batches(len(normal), cfg.batch_size, rng)):
            k = draw_k(rng, cfg.max_k, cfg.k_policy) if uses_k else cfg.max_k
            draws.append(k)
            counts[k] = counts.get(k, 0) + 1
            loss = model.reconstruction_error(normal.take(idx), k).mean()
            value = float(loss.data)
            _finite_or_abort(value, epoch, step, trace)
            loss.backward()
            adam_step(model.params, state)
            total += value * len(idx)
            seen += len(idx)
        val_err = float(reconstruction_errors(model, val_normal, cfg.max_k if uses_k else None).mean())
        trace.append(EpochRecord(epoch, total / seen, math.nan, math.nan, math.nan, counts))
        if val_err < best:
            best, best_epoch, best_state, stale = val_err, epoch, copy.deepcopy(model.state_dict()), 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.load_state_dict(best_state)
    model.eval()
    errors = reconstruction_errors(model, val_batch, cfg.max_k if uses_k else None)
    threshold, f1 = choose_threshold(errors, val_batch.labels)
    trace[-1].val_f1 = f1
    return TrainResult(model, trace, best_epoch, None, threshold, draws)
