"""MAC aggregation schemes over lossy channels: simulation, metrics and scheme selection."""

__version__ = "0.1.0"
