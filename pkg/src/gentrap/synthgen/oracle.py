"""Clairvoyant reference predictor for a generated scenario."""

from __future__ import annotations

import numpy as np

from ..dataset import SampleSet
from ..training.metrics import MetricsReport
from .scenario import GroundTruth


def true_probability(truth: GroundTruth, samples: SampleSet, idx=None) -> np.ndarray:
    """Failure probability the generator assigned to each sample's label day."""
    s = samples if idx is None else samples.subset(idx)
    pos = {k: i for i, k in enumerate(truth.link_keys)}
    li = np.array([pos[k] for k in s.link_keys])
    di = (s.label_dates() - truth.dates[0]).astype(np.int64)
    return truth.probability[li, di]


def oracle_best_possible(truth: GroundTruth, samples: SampleSet, idx=None, fold: int | None = None) -> MetricsReport:
    """Score the predictor that applies the true rule to the true station (failure iff p >= 0.5)."""
    s = samples if idx is None else samples.subset(idx)
    pred = true_probability(truth, s) >= 0.5
    return MetricsReport.from_predictions(s.labels, pred, "oracle", fold)
