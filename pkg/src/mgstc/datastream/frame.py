"""Traffic frames and the CSV ingestion format.

File layout: header ``timestamp,<id_1>,...,<id_N>`` followed by one row per
interval. Timestamps are ISO-8601 or integer epoch seconds.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..errors import DataFormatError

EPOCH = np.datetime64("1970-01-01T00:00:00", "s")


@dataclass(frozen=True)
class TrafficFrame:
    values: np.ndarray  # (Gamma, N)
    timestamps: np.ndarray  # datetime64[s], (Gamma,)
    series_ids: tuple = field(default=())
    interval: np.timedelta64 = np.timedelta64(600, "s")

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataFormatError(f"values must be a (time, series) matrix, got shape {values.shape}")
        object.__setattr__(self, "values", values)
        ts = np.asarray(self.timestamps).astype("datetime64[s]")
        object.__setattr__(self, "timestamps", ts)
        if not self.series_ids:
            object.__setattr__(self, "series_ids", tuple(f"s{i}" for i in range(values.shape[1])))
        if len(ts) != values.shape[0] or len(self.series_ids) != values.shape[1]:
            raise DataFormatError("timestamps/series_ids do not match the value matrix")

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]

    def slice(self, start: int, stop: int) -> "TrafficFrame":
        return TrafficFrame(self.values[start:stop], self.timestamps[start:stop], self.series_ids,
                            self.interval)

    def with_values(self, values) -> "TrafficFrame":
        return TrafficFrame(values, self.timestamps, self.series_ids, self.interval)

    @classmethod
    def from_array(cls, values, start="2024-01-01T00:00:00", interval_s: int = 600, series_ids=()):
        values = np.asarray(values, dtype=np.float64)
        step = np.timedelta64(interval_s, "s")
        ts = np.datetime64(start, "s") + step * np.arange(values.shape[0])
        return cls(values, ts, tuple(series_ids), step)


def _parse_timestamp(text: str, line: int) -> np.datetime64:
    text = text.strip()
    try:
        if text.lstrip("-").isdigit():
            return EPOCH + np.timedelta64(int(text), "s")
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise DataFormatError(f"line {line}: bad timestamp {text!r}") from exc
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(dt, "s")


def load_csv(path) -> TrafficFrame:
    """Read a frame; rows are sorted by time and must be evenly spaced."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataFormatError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip().lower() != "timestamp" or len(header) < 2:
            raise DataFormatError(f"{path}: header must be 'timestamp,<id_1>,...'")
        ids = tuple(h.strip() for h in header[1:])
        stamps, rows, lines = [], [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(f"line {line}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row[1:]]
            except ValueError as exc:
                raise DataFormatError(f"line {line}: {exc}") from exc
            if not all(np.isfinite(vals)):
                raise DataFormatError(f"line {line}: non-finite value")
            stamps.append(_parse_timestamp(row[0], line))
            rows.append(vals)
            lines.append(line)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    ts = np.array(stamps, dtype="datetime64[s]")
    order = np.argsort(ts, kind="stable")
    ts = ts[order]
    values = np.array(rows, dtype=np.float64)[order]
    line_of = np.array(lines)[order]
    if len(ts) > 1:
        diffs = np.diff(ts)
        dup = np.flatnonzero(diffs == np.timedelta64(0, "s"))
        if dup.size:
            raise DataFormatError(f"line {line_of[dup[0] + 1]}: duplicate timestamp {ts[dup[0]]}")
        bad = np.flatnonzero(diffs != diffs[0])
        if bad.size:
            raise DataFormatError(
                f"line {line_of[bad[0] + 1]}: non-uniform interval ({diffs[bad[0]]} vs {diffs[0]})"
            )
        interval = diffs[0]
    else:
        interval = np.timedelta64(0, "s")
    return TrafficFrame(values, ts, ids, interval)


def write_csv(frame: TrafficFrame, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", *frame.series_ids])
        for t, row in zip(frame.timestamps, frame.values):
            w.writerow([str(t), *(repr(float(v)) for v in row)])
