"""Synthetic radio-link / weather scenario with a known weather-driven failure rule.

Each link has one relevant station among its nearest few. Any rain at that
station fades the link's signal by a fixed amount on the same day, so the link
shows when it rained but not how much. The amount recorded at the relevant
station drives the probability that the link is down on the following day
through a logistic rule.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from ..dataset.schema import TABLE_FILES
from ..errors import ConfigError
from ..numerics import write_npz

WEATHER_FEATURES = ("temperature", "humidity", "precipitation", "wind_speed", "pressure",
                    "cloud_cover", "visibility")
KPI_FEATURES = ("esec", "sesec", "uas", "bbe", "rx_level_min", "rx_level_max", "tx_level_max",
                "avail_time", "capacity")
SITE_CLUTTER = ("open_land", "open_urban", "dense_trees", "suburban", "industrial")
STATION_CLUTTER = ("open_land", "airport", "dense_trees", "urban")
CARD_TYPES = ("card_a", "card_b", "card_c")
MODULATIONS = ("qam64", "qam256", "qam1024")
FREQ_BANDS = ("f18", "f23", "f38", "f80")
TRIGGERS = ("precipitation", "storm")
RULES = ("logistic", "step")
DAY_SECONDS = 86400.0


@dataclass
class ScenarioConfig:
    seed: int = 0
    n_sites: int = 200
    links_per_site: int = 1
    n_stations: int = 10
    n_days: int = 300
    start_date: str = "2021-01-01"
    area: float = 100.0

    target_failure_rate: float = 0.003
    # weather -> failure coupling: 1 means every failure follows the rule, 0 means failures are iid
    coupling: float = 1.0
    rule: str = "logistic"            # "step" makes failures a deterministic function of the trigger
    steepness: float = 12.0           # logistic slope per standard deviation of the trigger
    trigger: str = "precipitation"
    accumulation_days: int = 1         # days averaged into the trigger, ending on the day before the label
    variable_station_fraction: float = 0.5
    # per-link shift of the rule threshold, in trigger standard deviations
    band_margin: float = 0.5          # spread across frequency bands (higher bands fail earlier)
    link_margin_sd: float = 0.0
    # slowly drifting link condition that lowers the threshold; visible through transmit power
    link_state_sd: float = 2.0
    link_state_persistence: float = 0.9
    candidate_stations: int = 3

    # weather process
    correlation_length: float = 10.0
    persistence: float = 0.5
    rain_probability: float = 0.3

    # link behaviour
    # a wet antenna fades by a roughly fixed amount whatever the rain intensity
    wet_fade_db: float = 6.0
    kpi_noise: float = 0.5
    missing_fraction: float = 0.075

    def __post_init__(self):
        if self.n_days < 30:
            raise ConfigError(f"n_days must be >= 30, got {self.n_days}")
        if self.n_stations < self.candidate_stations:
            raise ConfigError(f"need at least {self.candidate_stations} stations, got {self.n_stations}")
        if self.rule not in RULES:
            raise ConfigError(f"rule must be one of {RULES}")
        if self.accumulation_days < 1:
            raise ConfigError("accumulation_days must be at least 1")
        if self.trigger not in TRIGGERS:
            raise ConfigError(f"trigger must be one of {TRIGGERS}")
        if not 0 <= self.coupling <= 1:
            raise ConfigError("coupling must lie in [0, 1]")
        if not 0 <= self.variable_station_fraction <= 1:
            raise ConfigError("variable_station_fraction must lie in [0, 1]")
        if not 0 <= self.missing_fraction < 0.2:
            raise ConfigError("missing_fraction must lie in [0, 0.2)")
        if not 0 < self.target_failure_rate < 1:
            raise ConfigError("target_failure_rate must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise ConfigError(f"unknown scenario field(s): {sorted(bad)}")
        return cls(**d)


@dataclass
class GroundTruth:
    """What the generator knows and a model has to infer."""

    link_keys: list[tuple[str, str]]
    relevant_station: list[str]
    dates: np.ndarray                     # [n_days] datetime64[D]
    probability: np.ndarray               # [n_links, n_days] failure probability of each day
    trigger_value: np.ndarray             # [n_links, n_days] rule input on the day before
    failed: np.ndarray                    # [n_links, n_days] bool
    threshold: float = 0.0
    trigger_scale: float = 1.0
    config: dict = field(default_factory=dict)

    def failure_records(self) -> pd.DataFrame:
        li, di = np.nonzero(self.failed)
        return pd.DataFrame({
            "date": self.dates[di].astype(str),
            "site_id": [self.link_keys[i][0] for i in li],
            "mini_link_id": [self.link_keys[i][1] for i in li],
            "causal_station": [self.relevant_station[i] for i in li],
            "trigger_value": self.trigger_value[li, di],
        })

    @property
    def realized_rate(self) -> float:
        # the first day has no preceding trigger and is excluded
        return float(self.failed[:, 1:].mean())

    def save(self, directory) -> None:
        d = Path(directory)
        self.failure_records().to_csv(d / "ground-truth.csv", index=False, float_format="%.6f",
                                      lineterminator="\n")
        write_npz(d / "ground-truth.npz", dict(
            site_ids=np.array([k[0] for k in self.link_keys]),
            link_ids=np.array([k[1] for k in self.link_keys]),
            relevant_station=np.array(self.relevant_station),
            dates=self.dates.astype("datetime64[D]").astype(np.int64),
            probability=self.probability, trigger_value=self.trigger_value, failed=self.failed,
            threshold=np.array(self.threshold), trigger_scale=np.array(self.trigger_scale)))
        (d / "scenario.json").write_text(json.dumps(self.config, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory) -> "GroundTruth":
        d = Path(directory)
        with np.load(d / "ground-truth.npz", allow_pickle=False) as z:
            keys = list(zip(z["site_ids"].tolist(), z["link_ids"].tolist()))
            cfg = json.loads((d / "scenario.json").read_text()) if (d / "scenario.json").exists() else {}
            return cls(keys, z["relevant_station"].tolist(), z["dates"].astype("datetime64[D]"),
                       z["probability"], z["trigger_value"], z["failed"], float(z["threshold"]),
                       float(z["trigger_scale"]), cfg)


@dataclass
class Scenario:
    tables: dict[str, pd.DataFrame]
    truth: GroundTruth
    daily_weather: np.ndarray             # [n_stations, n_days, n_weather] after blanking, as the tables imply
    station_ids: list[str]

    def to_tables(self):
        """Parse the generated tables exactly as ``load_tables`` would parse the written files."""
        from ..dataset.schema import SCHEMAS
        from ..dataset.tables import Tables, parse_table
        bad: dict = {}
        frames = {name: parse_table(df.astype(str), SCHEMAS[name], bad) for name, df in self.tables.items()}
        return Tables(**frames, bad_cells=bad)

    def write(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name, fname in TABLE_FILES.items():
            self.tables[name].to_csv(d / fname, index=False, lineterminator="\n")
        self.truth.save(d)
        return d


# -- weather -------------------------------------------------------------------

def _spatial_noise(rng, chol, n_days):
    return (chol @ rng.standard_normal((chol.shape[0], n_days)))


def _ar1(rng, chol, n_days, phi):
    eps = _spatial_noise(rng, chol, n_days)
    z = np.empty_like(eps)
    z[:, 0] = eps[:, 0]
    s = np.sqrt(1 - phi * phi)
    for t in range(1, n_days):
        z[:, t] = phi * z[:, t - 1] + s * eps[:, t]
    return z


def _daily_weather(rng, cfg: ScenarioConfig, station_xy) -> np.ndarray:
    """[n_stations, n_days, 7] daily truth before hourly expansion."""
    d = np.linalg.norm(station_xy[:, None] - station_xy[None], axis=-1)
    chol = np.linalg.cholesky(np.exp(-d / cfg.correlation_length) + 1e-9 * np.eye(len(d)))
    n, T = len(station_xy), cfg.n_days
    from scipy.stats import norm
    cut = norm.ppf(1 - cfg.rain_probability)
    rain_z = _ar1(rng, chol, T, cfg.persistence)
    precip = np.maximum(rain_z - cut, 0.0) ** 1.5 * 4.0
    wind_z = _ar1(rng, chol, T, cfg.persistence)
    wind = np.exp(1.6 + 0.45 * wind_z + 0.2 * rng.standard_normal((n, T)))
    season = 12 - 10 * np.cos(2 * np.pi * np.arange(T) / 365.0)
    temp = season + 3 * _ar1(rng, chol, T, 0.7) + 0.5 * rng.standard_normal((n, T)) - 0.8 * (precip > 0)
    humidity = np.clip(55 + 12 * rain_z + 4 * rng.standard_normal((n, T)), 5, 100)
    pressure = 1013 - 6 * rain_z - 2 * wind_z + rng.standard_normal((n, T))
    cloud = np.clip(40 + 25 * rain_z + 10 * rng.standard_normal((n, T)), 0, 100)
    visibility = np.clip(20 - 1.5 * precip + rng.standard_normal((n, T)), 0.5, 30)
    return np.stack([temp, humidity, precip, wind, pressure, cloud, visibility], axis=-1)


def _hourly(rng, daily: np.ndarray, missing: float) -> tuple[np.ndarray, np.ndarray]:
    """Expand to 24 hourly values whose mean is the daily value, round to 6 decimals, then blank cells.

    Returns the hourly array (NaN = blank) and the daily means those hourly
    cells actually imply.
    """
    n, T, F = daily.shape
    precip_idx = WEATHER_FEATURES.index("precipitation")
    dev = rng.standard_normal((n, T, 24, F))
    dev -= dev.mean(axis=2, keepdims=True)
    scale = np.array([1.5, 4.0, 0.0, 1.0, 0.8, 6.0, 1.0])
    hourly = daily[:, :, None, :] + dev * scale
    w = rng.gamma(2.0, size=(n, T, 24))
    w /= w.sum(axis=2, keepdims=True)
    hourly[..., precip_idx] = daily[:, :, None, precip_idx] * 24 * w
    hourly[..., precip_idx] = np.maximum(hourly[..., precip_idx], 0.0)
    hourly = np.round(hourly, 6)
    hourly[hourly == 0] = 0.0                       # no negative zeros in the text
    blank = rng.random(hourly.shape) < missing
    blank[:, :, 0, :] &= ~blank[:, :, 1:, :].all(axis=2)   # keep at least one hour per day
    hourly[blank] = np.nan
    return hourly, np.nanmean(hourly, axis=2)


# -- failure rule -----------------------------------------------------------------

def _trigger(cfg: ScenarioConfig, daily: np.ndarray) -> np.ndarray:
    """Per station and day, the quantity the failure rule thresholds.

    The daily value (rain, or rain times wind for storms) is averaged over
    the ``accumulation_days`` days ending at t.
    """
    x = daily[..., WEATHER_FEATURES.index("precipitation")]
    if cfg.trigger == "storm":
        x = x * daily[..., WEATHER_FEATURES.index("wind_speed")] / 5.0
    a = cfg.accumulation_days
    if a == 1:
        return x
    c = np.cumsum(np.pad(x, ((0, 0), (a, 0))), axis=1)
    return (c[:, a:] - c[:, :-a]) / a


def _link_state(rng, n_links, n_days, phi):
    z = np.empty((n_links, n_days))
    z[:, 0] = rng.standard_normal(n_links)
    s = np.sqrt(1 - phi * phi)
    for t in range(1, n_days):
        z[:, t] = phi * z[:, t - 1] + s * rng.standard_normal(n_links)
    return z


def _sigmoid(x):
    return 0.5 * (1 + np.tanh(0.5 * x))


def _rate(x: np.ndarray, theta: float, cfg: ScenarioConfig, scale: float) -> float:
    p_rule = _sigmoid(cfg.steepness * (x / scale - theta / scale))
    return float(np.mean(cfg.coupling * p_rule + (1 - cfg.coupling) * cfg.target_failure_rate))


def calibrate_threshold(x: np.ndarray, cfg: ScenarioConfig) -> tuple[float, float]:
    """Solve for the rule threshold that yields the target rate; returns (threshold, scale)."""
    scale = float(x.std()) or 1.0
    if cfg.coupling == 0:
        return float("inf"), scale
    if cfg.rule == "step":
        # the rate is reachable only up to ties in x
        return float(np.quantile(x, 1 - cfg.target_failure_rate)), scale
    lo_theta, hi_theta = 0.0, float(x.max()) + 20 * scale / cfg.steepness
    r_max, r_min = _rate(x, lo_theta, cfg, scale), _rate(x, hi_theta, cfg, scale)
    if not r_min <= cfg.target_failure_rate <= r_max:
        raise ConfigError(f"target failure rate {cfg.target_failure_rate} is not reachable with this rule; "
                          f"achievable range is [{r_min:.6f}, {r_max:.6f}]")
    theta = brentq(lambda t: _rate(x, t, cfg, scale) - cfg.target_failure_rate, lo_theta, hi_theta, xtol=1e-12)
    return float(theta), scale


# -- assembly --------------------------------------------------------------------------

def _blank(rng, values: np.ndarray, frac: float) -> np.ndarray:
    out = values.astype(float).copy()
    out[rng.random(out.shape) < frac] = np.nan
    return out


def _fmt(values: np.ndarray) -> np.ndarray:
    s = np.char.mod("%.6f", np.nan_to_num(values, nan=0.0))
    return np.where(np.isnan(values), "", s)


def generate(cfg: ScenarioConfig | None = None) -> Scenario:
    cfg = cfg or ScenarioConfig()
    rng = np.random.default_rng(cfg.seed)
    n_links = cfg.n_sites * cfg.links_per_site
    T = cfg.n_days
    dates = np.datetime64(cfg.start_date, "D") + np.arange(T)

    # geometry
    site_xy = rng.uniform(0, cfg.area, (cfg.n_sites, 2))
    station_xy = rng.uniform(0, cfg.area, (cfg.n_stations, 2))
    site_ids = [f"S{i:04d}" for i in range(cfg.n_sites)]
    station_ids = [f"W{j:03d}" for j in range(cfg.n_stations)]
    dist = np.round(np.linalg.norm(site_xy[:, None] - station_xy[None], axis=-1), 4)

    # weather
    daily_truth = _daily_weather(rng, cfg, station_xy)
    hourly, daily = _hourly(rng, daily_truth, cfg.missing_fraction)

    # links and their relevant station
    link_keys, rel_idx = [], []
    order = np.lexsort((np.tile(np.arange(cfg.n_stations), (cfg.n_sites, 1)), dist), axis=1)
    for i in range(cfg.n_sites):
        for m in range(cfg.links_per_site):
            link_keys.append((site_ids[i], f"L{m + 1}"))
            rank = 0
            if rng.random() < cfg.variable_station_fraction:
                rank = int(rng.integers(1, cfg.candidate_stations))
            rel_idx.append(int(order[i, rank]))
    rel_idx = np.array(rel_idx)

    card = rng.choice(CARD_TYPES, n_links)
    band = rng.choice(FREQ_BANDS, n_links)
    modulation = rng.choice(MODULATIONS, n_links)

    # failures: label day t+1 depends on the trigger at day t
    trig_station = _trigger(cfg, daily)
    raw_scale = float(trig_station.std()) or 1.0
    band_rank = np.array([FREQ_BANDS.index(b) for b in band]) / (len(FREQ_BANDS) - 1) - 0.5
    margin = raw_scale * (cfg.band_margin * band_rank + cfg.link_margin_sd * rng.standard_normal(n_links))
    state = _link_state(rng, n_links, T, cfg.link_state_persistence)
    x = np.zeros((n_links, T))
    x[:, 1:] = trig_station[rel_idx, :-1]
    x_eff = x + margin[:, None]
    x_eff[:, 1:] += raw_scale * cfg.link_state_sd * state[:, :-1]
    theta, scale = calibrate_threshold(x_eff[:, 1:], cfg)
    if cfg.rule == "step":
        p_rule = (x_eff > theta).astype(float)
    else:
        p_rule = _sigmoid(cfg.steepness * (x_eff - theta) / scale)
    p = cfg.coupling * p_rule + (1 - cfg.coupling) * cfg.target_failure_rate
    p[:, 0] = 0.0
    failed = rng.random((n_links, T)) < p

    # link KPIs
    precip_rel = daily[rel_idx, :, WEATHER_FEATURES.index("precipitation")]
    base_rx = rng.uniform(-45, -35, n_links)[:, None]
    fade = cfg.wet_fade_db * (precip_rel > 0)
    noise = cfg.kpi_noise
    rx_min = base_rx - fade + 2.0 * noise * rng.standard_normal((n_links, T))
    rx_max = rx_min + rng.uniform(2, 5, (n_links, T))
    # automatic transmit power control compensates a degrading path
    tx_max = 20.0 + 3.0 * state + 0.3 * noise * rng.standard_normal((n_links, T))
    err_rate = np.exp(0.5 + 0.25 * fade + 0.5 * noise * rng.standard_normal((n_links, T)))
    esec = rng.poisson(err_rate).astype(float)
    sesec = rng.binomial(esec.astype(int), 0.2).astype(float)
    bbe = rng.poisson(err_rate * 20).astype(float)
    uas = rng.poisson(0.2, (n_links, T)).astype(float)
    # outage days degrade the link visibly
    n_fail = int(failed.sum())
    uas[failed] = rng.uniform(3600, DAY_SECONDS, n_fail).round()
    esec[failed] += rng.poisson(300, n_fail)
    sesec[failed] += rng.poisson(150, n_fail)
    bbe[failed] += rng.poisson(5000, n_fail)
    rx_min[failed] -= rng.uniform(10, 30, n_fail)
    avail = DAY_SECONDS - uas
    mod_capacity = {"qam64": 300.0, "qam256": 400.0, "qam1024": 500.0}
    capacity = np.array([mod_capacity[m] for m in modulation])[:, None] * (avail / DAY_SECONDS)
    capacity = capacity + rng.standard_normal((n_links, T))
    kpi_vals = np.stack([esec, sesec, uas, bbe, rx_min, rx_max, tx_max, avail, capacity], axis=-1)
    kpi_vals = _blank(rng, kpi_vals, cfg.missing_fraction)

    L = n_links
    kpis = pd.DataFrame({
        "site_id": np.repeat([k[0] for k in link_keys], T),
        "mini_link_id": np.repeat([k[1] for k in link_keys], T),
        "date": np.tile(dates.astype(str), L),
        "card_type": np.repeat(card, T),
        "modulation": np.repeat(modulation, T),
        "freq_band": np.repeat(band, T),
        "failed": failed.reshape(-1).astype(int),
    })
    for j, f in enumerate(KPI_FEATURES):
        kpis[f] = _fmt(kpi_vals[:, :, j].reshape(-1))

    # hourly weather table
    S = cfg.n_stations
    stamps = (dates[:, None].astype("datetime64[h]") + np.arange(24)).reshape(-1)
    met_real = pd.DataFrame({
        "station_id": np.repeat(station_ids, T * 24),
        "timestamp": np.tile(pd.to_datetime(stamps).strftime("%Y-%m-%d %H:%M").to_numpy(), S),
    })
    for j, f in enumerate(WEATHER_FEATURES):
        met_real[f] = _fmt(hourly[..., j].reshape(-1))

    # forecast category follows the day's observed weather
    pi, ti, ci = (WEATHER_FEATURES.index(n) for n in ("precipitation", "temperature", "cloud_cover"))
    cat = np.where(daily[..., pi] > 0.1, np.where(daily[..., ti] < 0, "snow", "rain"),
                   np.where(daily[..., ci] > 50, "scattered clouds", "clear"))
    met_forecast = pd.DataFrame({
        "station_id": np.repeat(station_ids, T),
        "date": np.tile(dates.astype(str), S),
        "weather_day": cat.reshape(-1),
    })

    rl_sites = pd.DataFrame({"site_id": site_ids, "height": _fmt(rng.uniform(10, 60, cfg.n_sites)),
                             "clutter_class": rng.choice(SITE_CLUTTER, cfg.n_sites)})
    met_stations = pd.DataFrame({"station_id": station_ids, "height": _fmt(rng.uniform(2, 40, S)),
                                 "clutter_class": rng.choice(STATION_CLUTTER, S)})
    distances = pd.DataFrame({"site_id": np.repeat(site_ids, S), "station_id": np.tile(station_ids, cfg.n_sites),
                              "distance": _fmt(dist.reshape(-1))})

    truth = GroundTruth(link_keys, [station_ids[j] for j in rel_idx], dates, p, x, failed,
                        theta, scale, cfg.to_dict())
    tables = {"rl_sites": rl_sites, "rl_kpis": kpis, "met_stations": met_stations, "met_real": met_real,
              "met_forecast": met_forecast, "distances": distances}
    return Scenario(tables, truth, daily, station_ids)
