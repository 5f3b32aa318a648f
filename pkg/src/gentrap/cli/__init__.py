"""Command-line interface and run configuration."""

from .config import SCHEMA_VERSION, DatasetOptions, ExperimentOptions, RunConfig, from_dict, load_config
from .main import build_parser, main

__all__ = [name for name in dir() if not name.startswith("_")]
