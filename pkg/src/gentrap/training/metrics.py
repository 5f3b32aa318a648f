"""Confusion counts and per-class / macro precision, recall and F1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass
class MetricsReport:
    tp: int
    tn: int
    fp: int
    fn: int
    model: str = ""
    fold: int | None = None

    @classmethod
    def from_predictions(cls, y_true, y_pred, model: str = "", fold: int | None = None) -> "MetricsReport":
        t = np.asarray(y_true).astype(bool)
        p = np.asarray(y_pred).astype(bool)
        return cls(int((t & p).sum()), int((~t & ~p).sum()), int((~t & p).sum()), int((t & ~p).sum()),
                   model, fold)

    # failure class is the positive class
    @property
    def precision_failure(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall_failure(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def f1_failure(self) -> float:
        return _f1(self.precision_failure, self.recall_failure)

    @property
    def precision_normal(self) -> float:
        return _ratio(self.tn, self.tn + self.fn)

    @property
    def recall_normal(self) -> float:
        return _ratio(self.tn, self.tn + self.fp)

    @property
    def f1_normal(self) -> float:
        return _f1(self.precision_normal, self.recall_normal)

    @property
    def precision(self) -> float:
        return (self.precision_failure + self.precision_normal) / 2

    @property
    def recall(self) -> float:
        return (self.recall_failure + self.recall_normal) / 2

    @property
    def f1(self) -> float:
        """Macro F1: the plain mean of the two per-class F1 scores."""
        return (self.f1_failure + self.f1_normal) / 2

    def to_dict(self) -> dict:
        out = {"model": self.model, "fold": self.fold, "tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}
        for name in ("precision", "recall", "f1", "precision_failure", "recall_failure", "f1_failure",
                     "precision_normal", "recall_normal", "f1_normal"):
            out[name] = getattr(self, name)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(int(d["tp"]), int(d["tn"]), int(d["fp"]), int(d["fn"]), d.get("model", ""), d.get("fold"))


def macro_f1(y_true, y_pred) -> float:
    return MetricsReport.from_predictions(y_true, y_pred).f1
