"""Column layout of the six input tables (see docs/schema.md)."""

from __future__ import annotations

from dataclasses import dataclass

TABLE_FILES = {
    "rl_sites": "rl-sites.csv",
    "rl_kpis": "rl-kpis.csv",
    "met_stations": "met-stations.csv",
    "met_real": "met-real.csv",
    "met_forecast": "met-forecast.csv",
    "distances": "distances.csv",
}


@dataclass(frozen=True)
class TableSchema:
    name: str
    keys: tuple[str, ...]
    categorical: tuple[str, ...] = ()
    fixed_numeric: tuple[str, ...] = ()
    # every column not listed above is parsed as a numeric feature
    open_numeric: bool = False

    @property
    def required(self) -> tuple[str, ...]:
        return self.keys + self.categorical + self.fixed_numeric


SCHEMAS = {
    "rl_sites": TableSchema("rl_sites", ("site_id",), ("clutter_class",), ("height",)),
    "rl_kpis": TableSchema(
        "rl_kpis",
        ("site_id", "mini_link_id", "date"),
        ("card_type", "modulation", "freq_band"),
        ("failed",),
        open_numeric=True,
    ),
    "met_stations": TableSchema("met_stations", ("station_id",), ("clutter_class",), ("height",)),
    "met_real": TableSchema("met_real", ("station_id", "timestamp"), open_numeric=True),
    "met_forecast": TableSchema("met_forecast", ("station_id", "date"), ("weather_day",)),
    "distances": TableSchema("distances", ("site_id", "station_id"), (), ("distance",)),
}

LINK_CONFIG_FIELDS = ("card_type", "modulation", "freq_band")
STATIC_FIELDS = LINK_CONFIG_FIELDS + ("site_clutter", "station_clutter", "weather_day")
TIME_STEP_COLUMN = "time_step"
