"""End-to-end preprocessing: tables in, samples and a report out."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from .preprocess import align_weather_daily, drop_sparse_features, interpolate_missing
from .samples import SampleSet, build_samples
from .schema import LINK_CONFIG_FIELDS
from .tables import Tables


@dataclass
class PreprocessReport:
    dropped_features: dict[str, list[str]] = field(default_factory=dict)
    bad_cells: dict[str, int] = field(default_factory=dict)
    candidate_anchors: int = 0
    skipped_anchors: int = 0
    n_samples: int = 0
    n_failures: int = 0
    class_ratio: float = 0.0
    link_features: list[str] = field(default_factory=list)
    weather_features: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def preprocess(tables: Tables, window: int = 5, max_k: int = 3,
               drop_threshold: float = 0.20) -> tuple[SampleSet, PreprocessReport]:
    report = PreprocessReport(bad_cells={f"{t}.{c}": n for (t, c), n in sorted(tables.bad_cells.items())})

    weather_feats = tables.feature_columns("met_real")
    daily = align_weather_daily(tables.met_real, weather_feats)
    daily, dropped_w = drop_sparse_features(daily, weather_feats, drop_threshold)
    weather_feats = [f for f in weather_feats if f not in dropped_w]
    daily = interpolate_missing(daily, ["station_id"], weather_feats)

    link_feats = tables.feature_columns("rl_kpis")
    kpis, dropped_l = drop_sparse_features(tables.rl_kpis, link_feats, drop_threshold)
    link_feats = [f for f in link_feats if f not in dropped_l]
    kpis = interpolate_missing(kpis, ["site_id", "mini_link_id"], link_feats)
    report.dropped_features = {"rl_kpis": dropped_l, "met_real": dropped_w}

    cols = ["site_id", "mini_link_id", "date", "failed", *LINK_CONFIG_FIELDS, *link_feats]
    samples, build = build_samples(
        kpis[cols], daily, tables.distances, sites=tables.rl_sites, stations=tables.met_stations,
        forecast=tables.met_forecast, window=window, max_k=max_k,
        link_features=link_feats, weather_features=weather_feats)
    report.candidate_anchors = build.candidate_anchors
    report.skipped_anchors = build.skipped_gaps
    report.n_samples = len(samples)
    report.n_failures = int(samples.labels.sum())
    report.class_ratio = samples.class_ratio() if len(samples) else 0.0
    report.link_features = samples.link_features
    report.weather_features = samples.weather_features
    return samples, report
