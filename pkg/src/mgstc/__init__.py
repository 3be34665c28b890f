"""Multi-grained spatial-temporal forecasting for streaming traffic."""
__version__ = "0.1.0"
