import io

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gentrap.dataset import (
    SCHEMAS,
    FeatureEncoder,
    align_weather_daily,
    build_samples,
    check_fold,
    derive_knn_weather_features,
    drop_sparse_features,
    interpolate_missing,
    interpolate_series,
    load_tables,
    parse_table,
    read_table,
    rolling_origin_folds,
)
from gentrap.errors import ConfigError, DataError, PreconditionError, SchemaError


def _raw(text: str) -> pd.DataFrame:
    return pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)


KPI_HEADER = "site_id,mini_link_id,date,card_type,modulation,freq_band,failed,esec,uas\n"


# -- loading -----------------------------------------------------------------

def test_kpi_row_parses():
    df = parse_table(_raw(KPI_HEADER + "S1,L1,2020-01-01,c1,QAM,f1,0,1.5,2\n"), SCHEMAS["rl_kpis"])
    row = df.iloc[0]
    assert (row.site_id, row.mini_link_id) == ("S1", "L1")
    assert row.date == pd.Timestamp("2020-01-01")
    assert row.esec == 1.5 and not row.failed


def test_unexpected_string_marked_missing_row_kept():
    bad: dict = {}
    text = KPI_HEADER + "S1,L1,2020-01-01,c1,QAM,f1,0,oops,2\nS1,L1,2020-01-02,c1,QAM,f1,1,3,4\n"
    df = parse_table(_raw(text), SCHEMAS["rl_kpis"], bad)
    assert len(df) == 2
    assert np.isnan(df.esec.iloc[0])
    assert bool(df.failed.iloc[1])
    assert bad == {("rl_kpis", "esec"): 1}


def test_missing_column_names_table_and_column():
    with pytest.raises(SchemaError, match="rl_kpis.*failed"):
        parse_table(_raw("site_id,mini_link_id,date,card_type,modulation,freq_band\n"), SCHEMAS["rl_kpis"])


def test_empty_file_gives_empty_table(tmp_path):
    p = tmp_path / "rl-kpis.csv"
    p.write_text("")
    assert len(read_table(p, SCHEMAS["rl_kpis"])) == 0


# -- alignment ----------------------------------------------------------------

def _hourly(values, station="W1", day="2020-01-01"):
    ts = pd.date_range(day, periods=len(values), freq="h")
    return pd.DataFrame({"station_id": station, "timestamp": ts, "temp": values})


def test_align_constant_day():
    assert align_weather_daily(_hourly([5.0] * 24)).temp.tolist() == [5.0]


def test_align_ignores_missing_hours():
    vals = [0.0, 10.0] + [np.nan] * 22
    assert align_weather_daily(_hourly(vals)).temp.iloc[0] == 5.0


def test_align_all_missing_stays_missing():
    assert np.isnan(align_weather_daily(_hourly([np.nan] * 24)).temp.iloc[0])


# -- dropping and interpolation -------------------------------------------------

def _frac_missing(frac: float, n: int = 20) -> pd.DataFrame:
    col = np.arange(n, dtype=float)
    col[: int(round(frac * n))] = np.nan
    return pd.DataFrame({"a": col, "b": np.arange(n, dtype=float)})


@pytest.mark.parametrize("frac,dropped", [(0.25, True), (0.0, False), (0.20, True), (0.15, False)])
def test_drop_threshold(frac, dropped):
    out, names = drop_sparse_features(_frac_missing(frac), ["a", "b"])
    assert ("a" in names) == dropped
    assert ("a" in out.columns) != dropped
    assert "b" in out.columns


def test_drop_threshold_range():
    with pytest.raises(ConfigError):
        drop_sparse_features(_frac_missing(0.1), ["a"], threshold=0.0)


def test_interpolate_midpoint():
    d = np.arange(3).astype("datetime64[D]")
    assert interpolate_series(d, np.array([1.0, np.nan, 3.0])).tolist() == [1, 2, 3]


def test_interpolate_leading_gap_extends():
    d = np.arange(3).astype("datetime64[D]")
    assert interpolate_series(d, np.array([np.nan, 4.0, 4.0])).tolist() == [4, 4, 4]


def test_interpolate_no_gaps_unchanged():
    d = np.arange(3).astype("datetime64[D]")
    v = np.array([1.0, 7.0, 2.0])
    assert interpolate_series(d, v).tolist() == v.tolist()


def test_interpolate_all_missing_raises():
    with pytest.raises(DataError):
        interpolate_series(np.arange(2).astype("datetime64[D]"), np.array([np.nan, np.nan]))


def test_drop_then_interpolate_leaves_no_missing():
    rng = np.random.default_rng(0)
    df = pd.DataFrame({
        "entity": np.repeat(["a", "b"], 30),
        "date": np.tile(pd.date_range("2020-01-01", periods=30), 2),
        "x": rng.normal(size=60), "y": rng.normal(size=60),
    })
    df.loc[rng.choice(60, 8, replace=False), "x"] = np.nan
    df.loc[rng.choice(60, 20, replace=False), "y"] = np.nan
    kept, dropped = drop_sparse_features(df, ["x", "y"])
    assert dropped == ["y"]
    filled = interpolate_missing(kept, ["entity"], ["x"])
    assert not filled["x"].isna().any()


# -- samples --------------------------------------------------------------------

def _toy_tables(n_days=6, fail_day=6, distances=(3.0, 1.0, 2.0)):
    dates = pd.date_range("2020-01-01", periods=n_days)
    kpis = pd.DataFrame({
        "site_id": "S1", "mini_link_id": "L1", "date": dates,
        "card_type": "c", "modulation": "m", "freq_band": "f",
        "failed": [i + 1 == fail_day for i in range(n_days)],
        "esec": np.arange(n_days, dtype=float),
    })
    stations = ["W1", "W2", "W3"]
    weather = pd.DataFrame({
        "station_id": np.repeat(stations, n_days),
        "date": np.tile(dates, 3),
        "rain": np.concatenate([np.full(n_days, 10.0 * (j + 1)) for j in range(3)]),
    })
    dist = pd.DataFrame({"site_id": "S1", "station_id": stations, "distance": list(distances)})
    return kpis, weather, dist


def test_next_day_failure_label():
    kpis, weather, dist = _toy_tables()
    s, rep = build_samples(kpis, weather, dist)
    assert len(s) == 1 and rep.emitted == 1
    assert s.labels.tolist() == [1]
    assert s.anchor_dates[0] == np.datetime64("2020-01-05")
    assert s.link_windows[0, :, -1].tolist() == [1, 2, 3, 4, 5]


def test_short_history_emits_nothing():
    kpis, weather, dist = _toy_tables(n_days=4, fail_day=99)
    s, _ = build_samples(kpis, weather, dist)
    assert len(s) == 0


def test_station_windows_sorted_by_distance():
    kpis, weather, dist = _toy_tables()
    s, _ = build_samples(kpis, weather, dist)
    assert s.station_ids[0].tolist() == ["W2", "W3", "W1"]
    assert s.station_distances[0].tolist() == [1.0, 2.0, 3.0]
    assert s.station_windows[0, :, 0, 0].tolist() == [20.0, 30.0, 10.0]


def test_station_ties_broken_by_id():
    kpis, weather, dist = _toy_tables(distances=(1.0, 1.0, 1.0))
    s, _ = build_samples(kpis, weather, dist)
    assert s.station_ids[0].tolist() == ["W1", "W2", "W3"]


def test_gap_anchor_skipped_and_counted():
    kpis, weather, dist = _toy_tables(n_days=12, fail_day=99)
    kpis = kpis.drop(index=7)
    s, rep = build_samples(kpis, weather, dist)
    assert rep.candidate_anchors == 7
    assert rep.skipped_gaps + rep.emitted == rep.candidate_anchors
    # day index 7 is the label day of one anchor and inside the window of four more
    assert rep.skipped_gaps == 5


def test_no_temporal_leakage_exhaustive():
    kpis, weather, dist = _toy_tables(n_days=40, fail_day=20)
    s, _ = build_samples(kpis, weather, dist)
    for i in range(len(s)):
        assert s.window_dates(i).max() < s.label_dates()[i]


def test_sampleset_save_load(tmp_path):
    kpis, weather, dist = _toy_tables(n_days=12)
    s, _ = build_samples(kpis, weather, dist)
    s2 = type(s).load(s.save(tmp_path / "s.npz"))
    assert np.array_equal(s.link_windows, s2.link_windows)
    assert np.array_equal(s.anchor_dates, s2.anchor_dates)
    assert s.static_categories.tolist() == s2.static_categories.tolist()


# -- folds ------------------------------------------------------------------------

def _days(n):
    return np.datetime64("2020-01-01") + np.arange(n)


def test_fold_one_proportions():
    d = _days(100)
    f = rolling_origin_folds(d)[0]
    day = lambda idx: (idx.min() + 1, idx.max() + 1)
    assert day(f.train) == (1, 70) and day(f.validation) == (71, 90) and day(f.test) == (91, 100)


def test_fold_two_shifts_back():
    f = rolling_origin_folds(_days(100))[1]
    day = lambda idx: (idx.min() + 1, idx.max() + 1)
    assert day(f.train) == (1, 60) and day(f.validation) == (61, 80) and day(f.test) == (81, 90)


def test_too_few_samples():
    with pytest.raises(ConfigError):
        rolling_origin_folds(_days(49), n_folds=5)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 400), min_size=60, max_size=300), st.integers(1, 5))
def test_folds_ordered_and_disjoint(offsets, n_folds):
    dates = np.datetime64("2020-01-01") + np.array(offsets)
    try:
        folds = rolling_origin_folds(dates, n_folds)
    except ConfigError:
        return
    for f in folds:
        check_fold(f, dates)


# -- derived k-NN features ------------------------------------------------------

def test_derived_stats_hand_case():
    w = np.array([2.0, 4.0, 6.0]).reshape(1, 3, 1, 1)
    out = derive_knn_weather_features(w, 3)[0, 0]
    assert out[:3].tolist() == [4.0, 2.0, 6.0]
    assert out[3] == pytest.approx(np.sqrt(8 / 3))
    assert out[3] == pytest.approx(1.633, abs=1e-3)


def test_derived_stats_k1():
    w = np.array([7.0, 1.0]).reshape(1, 2, 1, 1)
    assert derive_knn_weather_features(w, 1)[0, 0].tolist() == [7.0, 7.0, 7.0, 0.0]


def test_derived_stats_too_few_stations():
    with pytest.raises(PreconditionError):
        derive_knn_weather_features(np.zeros((1, 2, 5, 3)), 3)


@settings(max_examples=30, deadline=None)
@given(st.permutations([0, 1, 2]))
def test_derived_stats_permutation_invariant(perm):
    rng = np.random.default_rng(1)
    w = rng.normal(size=(4, 3, 5, 2))
    a = derive_knn_weather_features(w, 3)
    b = derive_knn_weather_features(w[:, list(perm)], 3)
    np.testing.assert_allclose(a, b, atol=1e-12)


# -- encoder ---------------------------------------------------------------------

def test_encoder_shapes_and_unknown_slot():
    kpis, weather, dist = _toy_tables(n_days=20, fail_day=12)
    s, _ = build_samples(kpis, weather, dist)
    enc = FeatureEncoder.fit(s, np.arange(5))
    b = enc.encode(s)
    assert b.pairs.shape == (len(s), 3, 5, 1 + 1 + 1)
    assert b.temporal.shape == (len(s), 5, 1 + 4)
    assert np.all(b.pairs[..., -1] == np.arange(1, 6))
    assert np.all(b.static.sum(axis=1) == len(s.static_fields))
    s.static_categories[:, 0] = "never-seen"
    ids = enc.static.ids(s.static_categories)
    assert np.all(ids[:, 0] == len(enc.static.vocab[0]) - 1)
    enc2 = FeatureEncoder.from_dict(enc.to_dict())
    assert np.array_equal(enc2.encode(s).pairs, enc.encode(s).pairs)


def test_load_tables_from_directory(tmp_path):
    files = {
        "rl-sites.csv": "site_id,height,clutter_class\nS1,10,urban\n",
        "rl-kpis.csv": KPI_HEADER + "S1,L1,2020-01-01,c,m,f,0,1,2\n",
        "met-stations.csv": "station_id,height,clutter_class\nW1,3,open\n",
        "met-real.csv": "station_id,timestamp,rain\nW1,2020-01-01 00:00,0.5\n",
        "met-forecast.csv": "station_id,date,weather_day\nW1,2020-01-01,rain\n",
        "distances.csv": "site_id,station_id,distance\nS1,W1,1.0\n",
    }
    for name, text in files.items():
        (tmp_path / name).write_text(text)
    t = load_tables(tmp_path)
    assert t.feature_columns("rl_kpis") == ["esec", "uas"]
    assert t.feature_columns("met_real") == ["rain"]
