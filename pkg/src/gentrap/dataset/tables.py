"""Reading the six delimited-text tables into typed data frames."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from ..errors import SchemaError
from .schema import SCHEMAS, TABLE_FILES, TableSchema

log = logging.getLogger(__name__)


@dataclass
class Tables:
    rl_sites: pd.DataFrame
    rl_kpis: pd.DataFrame
    met_stations: pd.DataFrame
    met_real: pd.DataFrame
    met_forecast: pd.DataFrame
    distances: pd.DataFrame
    # (table, column) -> number of non-empty cells that failed numeric parsing
    bad_cells: dict[tuple[str, str], int] = field(default_factory=dict)

    def feature_columns(self, table: str) -> list[str]:
        schema = SCHEMAS[table]
        df = getattr(self, table)
        return [c for c in df.columns if c not in schema.required]


def _parse_bool(col: pd.Series) -> pd.Series:
    lowered = col.str.strip().str.lower()
    out = lowered.map({"1": True, "true": True, "0": False, "false": False, "1.0": True, "0.0": False})
    return out.fillna(False).astype(bool)


def parse_table(raw: pd.DataFrame, schema: TableSchema, bad_cells: dict | None = None) -> pd.DataFrame:
    """Type the columns of a string-valued frame according to ``schema``."""
    missing = [c for c in schema.required if c not in raw.columns]
    if missing:
        raise SchemaError(f"table {schema.name!r} is missing column(s): {', '.join(missing)}")
    df = raw.copy()
    for c in schema.keys:
        if c in ("date", "timestamp"):
            continue
        df[c] = df[c].astype(str).str.strip()
    if "date" in schema.keys:
        df["date"] = pd.to_datetime(df["date"]).dt.normalize()
    if "timestamp" in schema.keys:
        df["timestamp"] = pd.to_datetime(df["timestamp"])
    for c in schema.categorical:
        df[c] = df[c].astype(str).str.strip()
    numeric = list(schema.fixed_numeric)
    if schema.open_numeric:
        numeric += [c for c in df.columns if c not in schema.required]
    for c in numeric:
        if c == "failed":
            df[c] = _parse_bool(df[c].astype(str))
            continue
        text = df[c].astype(str).str.strip()
        parsed = pd.to_numeric(text.where(text != "", None), errors="coerce").astype(float)
        n_bad = int((parsed.isna() & (text != "") & (text.str.lower() != "nan")).sum())
        if n_bad and bad_cells is not None:
            bad_cells[(schema.name, c)] = n_bad
            log.info("%s.%s: %d unparseable cells marked missing", schema.name, c, n_bad)
        df[c] = parsed
    return df


def read_table(path: Path, schema: TableSchema, bad_cells: dict | None = None, sep: str = ",") -> pd.DataFrame:
    path = Path(path)
    if path.stat().st_size == 0:
        return parse_table(pd.DataFrame({c: pd.Series(dtype=str) for c in schema.required}), schema)
    raw = pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False)
    return parse_table(raw, schema, bad_cells)


def load_tables(paths, sep: str = ",") -> Tables:
    """Load all six tables.

    ``paths`` is either a directory holding the standard file names or a
    mapping from table name to file path.
    """
    if isinstance(paths, (str, Path)):
        root = Path(paths)
        paths = {name: root / fname for name, fname in TABLE_FILES.items()}
    bad: dict = {}
    frames = {name: read_table(Path(paths[name]), SCHEMAS[name], bad, sep) for name in TABLE_FILES}
    return Tables(**frames, bad_cells=bad)
