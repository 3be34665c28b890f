"""Ingestion, splitting, windowing, synthetic streams and stream metrics."""
from .frame import TrafficFrame, load_csv, write_csv
from .metrics import MetricTrace, cumulative_mse
from .split import Normalizer, SplitSpec, ewm_smooth, split_and_normalize
from .synth import DriftEvent, synth_stream
from .windows import batched_windows, window_batch, window_count, window_starts, windows

__all__ = [
    "DriftEvent", "MetricTrace", "Normalizer", "SplitSpec", "TrafficFrame", "batched_windows",
    "cumulative_mse", "ewm_smooth", "load_csv", "split_and_normalize", "synth_stream",
    "window_batch", "window_count", "window_starts", "windows", "write_csv",
]
