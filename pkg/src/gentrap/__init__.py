"""Radio link failure prediction with variable weather-station aggregation."""

__version__ = "0.1.0"
