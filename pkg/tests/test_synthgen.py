import hashlib

import numpy as np
import pandas as pd
import pytest

from gentrap.dataset import align_weather_daily, load_tables, preprocess
from gentrap.errors import ConfigError
from gentrap.synthgen import (
    WEATHER_FEATURES,
    GroundTruth,
    ScenarioConfig,
    generate,
    oracle_best_possible,
    true_probability,
)


def small(**kw):
    base = dict(n_sites=30, n_stations=5, n_days=60, target_failure_rate=0.02)
    base.update(kw)
    return ScenarioConfig(**base)


@pytest.fixture(scope="module")
def default_scenario():
    return generate(ScenarioConfig())


def _digests(directory):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.iterdir())}


def test_same_seed_byte_identical(tmp_path):
    a = generate(small(seed=3)).write(tmp_path / "a")
    b = generate(small(seed=3)).write(tmp_path / "b")
    assert _digests(a) == _digests(b)
    c = generate(small(seed=4)).write(tmp_path / "c")
    assert _digests(a) != _digests(c)


def test_written_files_load(tmp_path):
    d = generate(small()).write(tmp_path)
    tables = load_tables(d)
    assert len(tables.rl_kpis) == 30 * 60
    assert len(tables.met_real) == 5 * 60 * 24


def test_default_rate_within_band(default_scenario):
    truth = default_scenario.truth
    assert truth.failed.shape == (200, 300)
    assert 0.0021 <= truth.realized_rate <= 0.0039


def test_uncoupled_failures_ignore_precipitation():
    sc = generate(ScenarioConfig(n_sites=400, coupling=0.0, seed=1))
    t = sc.truth
    y = t.failed[:, 1:].ravel().astype(float)
    x = t.trigger_value[:, 1:].ravel()
    assert y.size >= 100_000
    r = np.corrcoef(x, y)[0, 1]
    assert abs(r) < 0.05


def test_coupled_failures_follow_precipitation(default_scenario):
    t = default_scenario.truth
    y = t.failed[:, 1:].ravel()
    x = t.trigger_value[:, 1:].ravel()
    assert x[y].mean() > 3 * x[~y].mean()


def test_infeasible_rate_reports_range():
    with pytest.raises(ConfigError, match="achievable range"):
        generate(small(target_failure_rate=0.999))


@pytest.mark.parametrize("kw", [dict(n_days=10), dict(n_stations=2), dict(coupling=1.5), dict(trigger="hail"),
                                dict(missing_fraction=0.3)])
def test_invalid_config(kw):
    with pytest.raises(ConfigError):
        small(**kw)


def test_config_round_trip():
    cfg = small(seed=9)
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"bogus": 1})


def test_every_failure_has_one_cause(default_scenario):
    t = default_scenario.truth
    rec = t.failure_records()
    assert len(rec) == int(t.failed.sum())
    assert rec.causal_station.notna().all()
    assert not rec.duplicated(["date", "site_id", "mini_link_id"]).any()
    rel = dict(zip(t.link_keys, t.relevant_station))
    assert all(rel[(s, m)] == c for s, m, c in zip(rec.site_id, rec.mini_link_id, rec.causal_station))


def test_relevant_station_varies(default_scenario):
    sc = default_scenario
    dist = sc.tables["distances"].astype({"distance": float})
    nearest = dist.sort_values(["distance", "station_id"]).groupby("site_id").station_id.first()
    rel = pd.Series(dict((k[0], s) for k, s in zip(sc.truth.link_keys, sc.truth.relevant_station)))
    share = (nearest[rel.index] == rel).mean()
    assert 0.2 < share < 0.8


def test_ground_truth_save_load(tmp_path):
    sc = generate(small())
    sc.truth.save(tmp_path)
    back = GroundTruth.load(tmp_path)
    assert back.link_keys == sc.truth.link_keys
    np.testing.assert_array_equal(back.failed, sc.truth.failed)
    np.testing.assert_array_equal(back.probability, sc.truth.probability)
    assert back.threshold == sc.truth.threshold


def test_hourly_to_daily_round_trip(default_scenario):
    sc = default_scenario
    tables = sc.to_tables()
    daily = align_weather_daily(tables.met_real, list(WEATHER_FEATURES))
    got = daily[list(WEATHER_FEATURES)].to_numpy().reshape(sc.daily_weather.shape)
    assert np.nanmax(np.abs(got - sc.daily_weather)) < 1e-9
    assert np.array_equal(np.isnan(got), np.isnan(sc.daily_weather))


def test_missing_cells_below_drop_threshold(default_scenario):
    kpis = default_scenario.tables["rl_kpis"]
    frac = (kpis.iloc[:, 7:] == "").mean()
    assert ((frac > 0.05) & (frac < 0.10)).all()


def test_ingestion_drops_nothing(default_scenario):
    samples, report = preprocess(default_scenario.to_tables())
    assert all(not v for v in report.dropped_features.values())
    assert report.bad_cells == {}
    assert len(samples.link_features) == 10
    assert samples.labels.sum() > 0


def test_distance_table_complete(default_scenario):
    d = default_scenario.tables["distances"]
    assert len(d) == 200 * 10
    assert not d.duplicated(["site_id", "station_id"]).any()
    assert set(d.site_id) == set(default_scenario.tables["rl_sites"].site_id)
    assert set(d.station_id) == set(default_scenario.tables["met_stations"].station_id)
    assert not set(d.site_id) & set(d.station_id)


def test_failure_days_degrade_kpis(default_scenario):
    kpis = default_scenario.to_tables().rl_kpis
    f = kpis.failed.astype(bool)
    assert kpis.uas[f].mean() > 100 * kpis.uas[~f].mean()


def test_forecast_consistent_with_rain(default_scenario):
    sc = default_scenario
    cat = sc.tables["met_forecast"].weather_day.to_numpy().reshape(sc.daily_weather.shape[:2])
    precip = sc.daily_weather[..., WEATHER_FEATURES.index("precipitation")]
    assert np.array_equal(np.isin(cat, ["rain", "snow"]), precip > 0.1)


# -- oracle ----------------------------------------------------------------------------

def test_step_rule_ceiling_is_one():
    sc = generate(small(rule="step", seed=2))
    samples, _ = preprocess(sc.to_tables())
    p = true_probability(sc.truth, samples)
    assert set(np.unique(p)) <= {0.0, 1.0}
    assert samples.labels.sum() > 0
    assert oracle_best_possible(sc.truth, samples).f1 == 1.0


def test_pure_noise_ceiling_is_half():
    sc = generate(small(coupling=0.0, seed=2))
    samples, _ = preprocess(sc.to_tables())
    m = oracle_best_possible(sc.truth, samples)
    assert m.tp == 0 and m.fp == 0
    assert m.f1 == pytest.approx(0.5, abs=0.02)


def test_oracle_probability_matches_labels_on_average(default_scenario):
    samples, _ = preprocess(default_scenario.to_tables())
    p = true_probability(default_scenario.truth, samples)
    assert p.sum() == pytest.approx(samples.labels.sum(), rel=0.3)
