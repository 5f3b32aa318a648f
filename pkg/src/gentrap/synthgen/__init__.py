"""Synthetic scenario generator with a known weather-to-failure mechanism."""

from .oracle import oracle_best_possible, true_probability
from .scenario import (
    KPI_FEATURES,
    WEATHER_FEATURES,
    GroundTruth,
    Scenario,
    ScenarioConfig,
    calibrate_threshold,
    generate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
