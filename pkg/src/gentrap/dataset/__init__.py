"""Ingestion, cleaning, windowing and splitting of link and weather tables."""

from .features import Batch, FeatureEncoder, StaticEncoder
from .folds import FoldSplit, check_fold, rolling_origin_folds
from .pipeline import PreprocessReport, preprocess
from .preprocess import align_weather_daily, drop_sparse_features, interpolate_missing, interpolate_series
from .samples import (
    BuildReport,
    Sample,
    SampleSet,
    build_samples,
    derive_knn_weather_features,
    derived_feature_names,
    nearest_stations,
)
from .schema import SCHEMAS, STATIC_FIELDS, TABLE_FILES
from .tables import Tables, load_tables, parse_table, read_table

__all__ = [name for name in dir() if not name.startswith("_")]
