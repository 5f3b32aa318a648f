"""Cleaning steps: hourly-to-daily alignment, sparse-feature dropping, imputation."""

from __future__ import annotations

import numpy as np
import pandas as pd

from ..errors import ConfigError, DataError


def align_weather_daily(hourly: pd.DataFrame, features: list[str] | None = None) -> pd.DataFrame:
    """Mean-aggregate hourly observations to one row per station per calendar day.

    Missing hours are ignored; a day with no observed hour for a feature
    stays missing.
    """
    if features is None:
        features = [c for c in hourly.columns if c not in ("station_id", "timestamp")]
    df = hourly[["station_id", "timestamp"] + features].copy()
    df["date"] = pd.to_datetime(df["timestamp"]).dt.normalize()
    daily = df.groupby(["station_id", "date"], sort=True)[features].mean()
    return daily.reset_index()


def drop_sparse_features(table: pd.DataFrame, features: list[str],
                         threshold: float = 0.20) -> tuple[pd.DataFrame, list[str]]:
    """Remove every feature whose missing fraction is at or above ``threshold``."""
    if not 0 < threshold <= 1:
        raise ConfigError(f"drop threshold must lie in (0, 1], got {threshold}")
    if len(table) == 0:
        return table, []
    frac = table[features].isna().mean()
    dropped = [f for f in features if frac[f] >= threshold]
    return table.drop(columns=dropped), dropped


def interpolate_series(dates: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Linear interpolation over date positions; ends take the nearest observed value."""
    ok = ~np.isnan(values)
    if not ok.any():
        raise DataError("cannot interpolate an all-missing series")
    if ok.all():
        return values
    x = np.asarray(dates, dtype="datetime64[D]").astype(np.int64).astype(float)
    out = values.copy()
    # np.interp clamps outside the observed range, i.e. nearest-value extension
    out[~ok] = np.interp(x[~ok], x[ok], values[ok])
    return out


def interpolate_missing(table: pd.DataFrame, entity_cols: list[str], features: list[str],
                        date_col: str = "date") -> pd.DataFrame:
    """Fill gaps per (entity, feature) series ordered by date."""
    df = table.sort_values(entity_cols + [date_col], kind="mergesort").reset_index(drop=True)
    if len(df) == 0:
        return df
    dates = df[date_col].to_numpy(dtype="datetime64[D]")
    values = df[features].to_numpy(dtype=float)
    for _, idx in df.groupby(entity_cols, sort=False).indices.items():
        for j, feat in enumerate(features):
            col = values[idx, j]
            if np.isnan(col).any():
                try:
                    values[idx, j] = interpolate_series(dates[idx], col)
                except DataError as exc:
                    key = df.loc[idx[0], entity_cols].tolist()
                    raise DataError(f"feature {feat!r} is missing for every day of {key}") from exc
    df[features] = values
    return df
