"""Rolling-origin train/validation/test splits over anchor dates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass
class FoldSplit:
    fold_index: int
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    def to_dict(self, dates: np.ndarray | None = None) -> dict:
        out = {"fold_index": self.fold_index,
               "train": self.train.tolist(),
               "validation": self.validation.tolist(),
               "test": self.test.tolist()}
        if dates is not None:
            for part in ("train", "validation", "test"):
                d = dates[getattr(self, part)]
                out[f"{part}_dates"] = [str(d.min()), str(d.max())] if len(d) else []
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FoldSplit":
        return cls(int(d["fold_index"]), np.asarray(d["train"], dtype=np.int64),
                   np.asarray(d["validation"], dtype=np.int64), np.asarray(d["test"], dtype=np.int64))


def _cut(tenths: int, n: int) -> int:
    # round(tenths / 10 * n) in integer arithmetic, halves rounded up
    return (tenths * n + 5) // 10


def rolling_origin_folds(anchor_dates, n_folds: int = 5) -> list[FoldSplit]:
    """Fold 1 spans the first 70% / next 20% / last 10% of the distinct dates.

    Each later fold moves all three boundaries 10% earlier, so fold ``i``
    ends at ``100 - 10 * (i - 1)`` percent of the time range.
    """
    dates = np.asarray(anchor_dates, dtype="datetime64[D]")
    if n_folds < 1 or n_folds > 7:
        raise ConfigError(f"n_folds must be in 1..7, got {n_folds}")
    if len(dates) < n_folds * 10:
        raise ConfigError(f"{len(dates)} samples is too few for {n_folds} folds (need {n_folds * 10})")
    uniq = np.unique(dates)
    n = len(uniq)
    pos = np.searchsorted(uniq, dates)
    folds = []
    for i in range(1, n_folds + 1):
        end = 10 - (i - 1)
        b_val, b_test, b_end = _cut(end - 3, n), _cut(end - 1, n), _cut(end, n)
        if not 0 < b_val < b_test < b_end:
            raise ConfigError(f"fold {i}: {n} distinct dates cannot be split 70/20/10")
        train = np.flatnonzero(pos < b_val)
        val = np.flatnonzero((pos >= b_val) & (pos < b_test))
        test = np.flatnonzero((pos >= b_test) & (pos < b_end))
        folds.append(FoldSplit(i, train, val, test))
    return folds


def check_fold(fold: FoldSplit, anchor_dates) -> None:
    """Raise AssertionError unless the fold is disjoint and strictly time-ordered."""
    dates = np.asarray(anchor_dates, dtype="datetime64[D]")
    tr, va, te = (set(fold.train.tolist()), set(fold.validation.tolist()), set(fold.test.tolist()))
    assert not (tr & va or tr & te or va & te), f"fold {fold.fold_index}: overlapping partitions"
    assert dates[fold.train].max() < dates[fold.validation].min(), f"fold {fold.fold_index}: train/val order"
    assert dates[fold.validation].max() < dates[fold.test].min(), f"fold {fold.fold_index}: val/test order"
