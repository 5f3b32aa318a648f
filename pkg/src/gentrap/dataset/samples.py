"""Windowed, labelled samples built from the cleaned link and weather tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import PreconditionError
from ..numerics import write_npz
from .schema import LINK_CONFIG_FIELDS, STATIC_FIELDS, TIME_STEP_COLUMN


@dataclass
class Sample:
    link_key: tuple[str, str]
    anchor_date: np.datetime64
    link_window: np.ndarray
    station_windows: list[np.ndarray]
    station_ids: list[str]
    static_categories: dict[str, str]
    label: int


@dataclass
class SampleSet:
    """Column-oriented store of samples.

    ``link_windows`` is ``[n, window, link_feat + 1]`` with the 1-based time
    step as the last column; ``station_windows`` is ``[n, max_k, window,
    weather_feat]`` ordered nearest station first.
    """

    site_ids: np.ndarray
    link_ids: np.ndarray
    anchor_dates: np.ndarray
    link_windows: np.ndarray
    station_windows: np.ndarray
    station_ids: np.ndarray
    station_distances: np.ndarray
    static_categories: np.ndarray
    labels: np.ndarray
    link_features: list[str] = field(default_factory=list)
    weather_features: list[str] = field(default_factory=list)
    static_fields: list[str] = field(default_factory=lambda: list(STATIC_FIELDS))

    _ARRAYS = ("site_ids", "link_ids", "anchor_dates", "link_windows", "station_windows",
               "station_ids", "station_distances", "static_categories", "labels")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def window(self) -> int:
        return self.link_windows.shape[1]

    @property
    def max_k(self) -> int:
        return self.station_windows.shape[1]

    @property
    def link_keys(self) -> list[tuple[str, str]]:
        return list(zip(self.site_ids.tolist(), self.link_ids.tolist()))

    def link_key_strings(self) -> np.ndarray:
        return np.char.add(np.char.add(self.site_ids.astype(str), "/"), self.link_ids.astype(str))

    def window_dates(self, i: int) -> np.ndarray:
        a = self.anchor_dates[i]
        return a - np.arange(self.window - 1, -1, -1).astype("timedelta64[D]")

    def label_dates(self) -> np.ndarray:
        return self.anchor_dates + np.timedelta64(1, "D")

    def subset(self, idx) -> "SampleSet":
        idx = np.asarray(idx)
        kw = {name: getattr(self, name)[idx] for name in self._ARRAYS}
        return SampleSet(**kw, link_features=list(self.link_features),
                         weather_features=list(self.weather_features),
                         static_fields=list(self.static_fields))

    def __getitem__(self, i: int) -> Sample:
        return Sample(
            link_key=(str(self.site_ids[i]), str(self.link_ids[i])),
            anchor_date=self.anchor_dates[i],
            link_window=self.link_windows[i],
            station_windows=list(self.station_windows[i]),
            station_ids=[str(s) for s in self.station_ids[i]],
            static_categories=dict(zip(self.static_fields, (str(c) for c in self.static_categories[i]))),
            label=int(self.labels[i]),
        )

    def class_ratio(self, idx=None) -> float:
        y = self.labels if idx is None else self.labels[np.asarray(idx)]
        pos = int(y.sum())
        neg = int(len(y) - pos)
        return pos / neg if neg else float("inf")

    # -- persistence ---------------------------------------------------------
    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        arrays = {name: getattr(self, name) for name in self._ARRAYS}
        arrays["anchor_dates"] = self.anchor_dates.astype("datetime64[D]").astype(np.int64)
        for name in ("site_ids", "link_ids", "station_ids", "static_categories"):
            arrays[name] = arrays[name].astype(str)
        arrays["link_features"] = np.array(self.link_features, dtype=str)
        arrays["weather_features"] = np.array(self.weather_features, dtype=str)
        arrays["static_fields"] = np.array(self.static_fields, dtype=str)
        return write_npz(path, arrays)

    @classmethod
    def load(cls, path) -> "SampleSet":
        with np.load(Path(path), allow_pickle=False) as z:
            kw = {name: z[name] for name in cls._ARRAYS}
            kw["anchor_dates"] = kw["anchor_dates"].astype("datetime64[D]")
            return cls(**kw, link_features=z["link_features"].tolist(),
                       weather_features=z["weather_features"].tolist(),
                       static_fields=z["static_fields"].tolist())


@dataclass
class BuildReport:
    candidate_anchors: int = 0
    emitted: int = 0
    skipped_gaps: int = 0


def nearest_stations(distances: pd.DataFrame, max_k: int) -> dict[str, list[tuple[str, float]]]:
    """Per site: the ``max_k`` closest stations, ties broken by station id."""
    ordered = distances.sort_values(["site_id", "distance", "station_id"], kind="mergesort")
    out: dict[str, list[tuple[str, float]]] = {}
    for site, grp in ordered.groupby("site_id", sort=True):
        out[site] = list(zip(grp["station_id"].tolist()[:max_k], grp["distance"].tolist()[:max_k]))
    return out


def build_samples(kpis: pd.DataFrame, weather: pd.DataFrame, distances: pd.DataFrame,
                  sites: pd.DataFrame | None = None, stations: pd.DataFrame | None = None,
                  forecast: pd.DataFrame | None = None, window: int = 5, max_k: int = 3,
                  link_features: list[str] | None = None,
                  weather_features: list[str] | None = None) -> tuple[SampleSet, BuildReport]:
    """Emit one sample per (link, anchor date) with a full window and a next-day label.

    The label is the link's ``failed`` flag on ``anchor + 1 day``. Anchors
    whose window (link or any of the ``max_k`` stations) or label day is
    absent are skipped and counted.
    """
    if link_features is None:
        fixed = {"site_id", "mini_link_id", "date", "failed", *LINK_CONFIG_FIELDS}
        link_features = [c for c in kpis.columns if c not in fixed]
    if weather_features is None:
        weather_features = [c for c in weather.columns if c not in ("station_id", "date")]
    report = BuildReport()

    all_dates = pd.concat([kpis["date"], weather["date"]]) if len(weather) else kpis["date"]
    if len(all_dates) == 0:
        return _empty_set(window, max_k, link_features, weather_features), report
    day0 = np.datetime64(all_dates.min().date(), "D")
    n_days = int((np.datetime64(all_dates.max().date(), "D") - day0).astype(int)) + 1

    def day_index(col: pd.Series) -> np.ndarray:
        return (col.to_numpy(dtype="datetime64[D]") - day0).astype(np.int64)

    station_list = sorted(weather["station_id"].unique().tolist())
    st_pos = {s: i for i, s in enumerate(station_list)}
    wx = np.full((len(station_list), n_days, len(weather_features)), np.nan)
    if len(weather):
        wx[weather["station_id"].map(st_pos).to_numpy(), day_index(weather["date"])] = \
            weather[weather_features].to_numpy(dtype=float)
    wx_present = ~np.isnan(wx).any(axis=2)

    forecast_map: dict[tuple[str, int], str] = {}
    if forecast is not None and len(forecast):
        for s, d, w in zip(forecast["station_id"], day_index(forecast["date"]), forecast["weather_day"]):
            forecast_map[(s, int(d))] = w
    site_clutter = dict(zip(sites["site_id"], sites["clutter_class"])) if sites is not None else {}
    st_clutter = dict(zip(stations["station_id"], stations["clutter_class"])) if stations is not None else {}
    neighbours = nearest_stations(distances, max_k)

    steps = np.arange(1, window + 1, dtype=float)
    cols: dict[str, list] = {k: [] for k in SampleSet._ARRAYS}
    kp = kpis.sort_values(["site_id", "mini_link_id", "date"], kind="mergesort")
    for (site, link), grp in kp.groupby(["site_id", "mini_link_id"], sort=True):
        nb = neighbours.get(site, [])
        if len(nb) < max_k:
            raise PreconditionError(f"site {site!r} has {len(nb)} stations with distances, need {max_k}")
        didx = day_index(grp["date"])
        lo, hi = int(didx.min()), int(didx.max())
        span = hi - lo + 1
        feats = np.full((span, len(link_features)), np.nan)
        feats[didx - lo] = grp[link_features].to_numpy(dtype=float)
        present = np.zeros(span, dtype=bool)
        present[didx - lo] = True
        present &= ~np.isnan(feats).any(axis=1)
        failed = np.zeros(span, dtype=np.int8)
        failed[didx - lo] = grp["failed"].to_numpy(dtype=np.int8)
        cfg = grp[list(LINK_CONFIG_FIELDS)].to_numpy(dtype=str)
        cfg_full = np.empty((span, len(LINK_CONFIG_FIELDS)), dtype=object)
        cfg_full[didx - lo] = cfg
        st_idx = [st_pos.get(s, -1) for s, _ in nb]
        st_ok = np.ones(span, dtype=bool)
        for j in st_idx:
            st_ok &= wx_present[j, lo:hi + 1] if j >= 0 else False

        # anchor offsets a: window days a-window+1..a, label day a+1
        for a in range(window - 1, span - 1):
            report.candidate_anchors += 1
            w0 = a - window + 1
            if not (present[w0:a + 1].all() and present[a + 1] and st_ok[w0:a + 1].all()):
                report.skipped_gaps += 1
                continue
            abs_a = lo + a
            nearest = nb[0][0]
            cols["site_ids"].append(site)
            cols["link_ids"].append(link)
            cols["anchor_dates"].append(day0 + np.timedelta64(abs_a, "D"))
            cols["link_windows"].append(np.column_stack([feats[w0:a + 1], steps]))
            cols["station_windows"].append(np.stack([wx[j, lo + w0:abs_a + 1] for j in st_idx]))
            cols["station_ids"].append([s for s, _ in nb])
            cols["station_distances"].append([d for _, d in nb])
            cols["static_categories"].append(list(cfg_full[a]) + [
                str(site_clutter.get(site, "unknown")),
                str(st_clutter.get(nearest, "unknown")),
                str(forecast_map.get((nearest, abs_a), "unknown")),
            ])
            cols["labels"].append(int(failed[a + 1]))
            report.emitted += 1

    if not cols["labels"]:
        return _empty_set(window, max_k, link_features, weather_features), report
    samples = SampleSet(
        site_ids=np.array(cols["site_ids"], dtype=str),
        link_ids=np.array(cols["link_ids"], dtype=str),
        anchor_dates=np.array(cols["anchor_dates"], dtype="datetime64[D]"),
        link_windows=np.stack(cols["link_windows"]),
        station_windows=np.stack(cols["station_windows"]),
        station_ids=np.array(cols["station_ids"], dtype=str),
        station_distances=np.array(cols["station_distances"], dtype=float),
        static_categories=np.array(cols["static_categories"], dtype=str),
        labels=np.array(cols["labels"], dtype=np.int8),
        link_features=list(link_features) + [TIME_STEP_COLUMN],
        weather_features=list(weather_features),
    )
    return samples, report


def _empty_set(window: int, max_k: int, link_features: list[str], weather_features: list[str]) -> SampleSet:
    return SampleSet(
        site_ids=np.array([], dtype=str), link_ids=np.array([], dtype=str),
        anchor_dates=np.array([], dtype="datetime64[D]"),
        link_windows=np.zeros((0, window, len(link_features) + 1)),
        station_windows=np.zeros((0, max_k, window, len(weather_features))),
        station_ids=np.zeros((0, max_k), dtype=str), station_distances=np.zeros((0, max_k)),
        static_categories=np.zeros((0, len(STATIC_FIELDS)), dtype=str),
        labels=np.zeros(0, dtype=np.int8),
        link_features=list(link_features) + [TIME_STEP_COLUMN],
        weather_features=list(weather_features),
    )


def derive_knn_weather_features(station_windows: np.ndarray, k: int = 3) -> np.ndarray:
    """Per day and weather feature: mean, min, max and population std over the ``k`` nearest stations.

    Input ``[n, max_k, window, feat]``; output ``[n, window, 4 * feat]`` laid
    out as ``[means | mins | maxs | stds]``.
    """
    if station_windows.shape[1] < k:
        raise PreconditionError(f"need {k} station windows, have {station_windows.shape[1]}")
    w = station_windows[:, :k]
    return np.concatenate([w.mean(axis=1), w.min(axis=1), w.max(axis=1), w.std(axis=1)], axis=-1)


def derived_feature_names(weather_features: list[str]) -> list[str]:
    return [f"{stat}_{f}" for stat in ("mean", "min", "max", "std") for f in weather_features]
