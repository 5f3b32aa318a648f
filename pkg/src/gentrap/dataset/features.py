"""Model-ready arrays: standardized windows, derived k-NN stats, one-hot statics.

All statistics and vocabularies are fitted on a training subset only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import PreconditionError
from .samples import SampleSet, derive_knn_weather_features

UNKNOWN = "<unk>"


@dataclass
class Batch:
    pairs: np.ndarray          # [n, max_k, window, link_feat + weather_feat + 1]
    static: np.ndarray         # [n, static_width]
    labels: np.ndarray         # [n]
    temporal: np.ndarray | None = None   # [n, window, link_feat + 4 * weather_feat]

    def __len__(self) -> int:
        return len(self.labels)

    def take(self, idx) -> "Batch":
        idx = np.asarray(idx)
        return Batch(self.pairs[idx], self.static[idx], self.labels[idx],
                     None if self.temporal is None else self.temporal[idx])

    def restrict_k(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.pairs.shape[1]:
            raise PreconditionError(f"k={k} outside 1..{self.pairs.shape[1]}")
        return self.pairs[:, :k]


class StaticEncoder:
    """Per-field one-hot vocabulary with an explicit unknown slot."""

    def __init__(self, vocab: list[list[str]]):
        self.vocab = [list(v) for v in vocab]
        self._index = [{c: i for i, c in enumerate(v)} for v in self.vocab]
        self.offsets = np.cumsum([0] + [len(v) for v in self.vocab])[:-1]

    @classmethod
    def fit(cls, categories: np.ndarray) -> "StaticEncoder":
        vocab = [sorted(set(categories[:, j].tolist())) + [UNKNOWN] for j in range(categories.shape[1])]
        return cls(vocab)

    @property
    def width(self) -> int:
        return int(sum(len(v) for v in self.vocab))

    def ids(self, categories: np.ndarray) -> np.ndarray:
        out = np.empty(categories.shape, dtype=np.int64)
        for j, index in enumerate(self._index):
            unk = index[UNKNOWN]
            out[:, j] = [index.get(c, unk) for c in categories[:, j].tolist()]
        return out

    def transform(self, categories: np.ndarray, dtype=np.float64) -> np.ndarray:
        ids = self.ids(categories) + self.offsets
        out = np.zeros((len(categories), self.width), dtype=dtype)
        np.put_along_axis(out, ids, 1.0, axis=1)
        return out


def _moments(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    flat = x.reshape(-1, x.shape[-1])
    mu = flat.mean(axis=0)
    sd = flat.std(axis=0)
    sd[sd < 1e-8] = 1.0
    return mu, sd


class FeatureEncoder:
    def __init__(self, link_stats, weather_stats, derived_stats, static: StaticEncoder, knn_k: int = 3):
        self.link_stats = link_stats
        self.weather_stats = weather_stats
        self.derived_stats = derived_stats
        self.static = static
        self.knn_k = knn_k

    @classmethod
    def fit(cls, samples: SampleSet, idx=None, knn_k: int = 3) -> "FeatureEncoder":
        s = samples if idx is None else samples.subset(idx)
        if len(s) == 0:
            raise PreconditionError("cannot fit feature statistics on an empty training set")
        link = s.link_windows[..., :-1]
        derived = derive_knn_weather_features(s.station_windows, knn_k)
        return cls(_moments(link), _moments(s.station_windows), _moments(derived),
                   StaticEncoder.fit(s.static_categories), knn_k)

    def encode(self, samples: SampleSet, idx=None, dtype=np.float32) -> Batch:
        s = samples if idx is None else samples.subset(idx)
        link = (s.link_windows[..., :-1] - self.link_stats[0]) / self.link_stats[1]
        steps = s.link_windows[..., -1:]
        wx = (s.station_windows - self.weather_stats[0]) / self.weather_stats[1]
        k = s.max_k
        link_rep = np.repeat(link[:, None], k, axis=1)
        steps_rep = np.repeat(steps[:, None], k, axis=1)
        pairs = np.concatenate([link_rep, wx, steps_rep], axis=-1)
        derived = derive_knn_weather_features(s.station_windows, self.knn_k)
        derived = (derived - self.derived_stats[0]) / self.derived_stats[1]
        temporal = np.concatenate([link, derived], axis=-1)
        static = self.static.transform(s.static_categories)
        return Batch(pairs.astype(dtype), static.astype(dtype), s.labels.astype(np.int64),
                     temporal.astype(dtype))

    def to_dict(self) -> dict:
        return {
            "link_mean": self.link_stats[0].tolist(), "link_std": self.link_stats[1].tolist(),
            "weather_mean": self.weather_stats[0].tolist(), "weather_std": self.weather_stats[1].tolist(),
            "derived_mean": self.derived_stats[0].tolist(), "derived_std": self.derived_stats[1].tolist(),
            "static_vocab": self.static.vocab, "knn_k": self.knn_k,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureEncoder":
        arr = np.asarray
        return cls((arr(d["link_mean"]), arr(d["link_std"])),
                   (arr(d["weather_mean"]), arr(d["weather_std"])),
                   (arr(d["derived_mean"]), arr(d["derived_std"])),
                   StaticEncoder(d["static_vocab"]), int(d["knn_k"]))
