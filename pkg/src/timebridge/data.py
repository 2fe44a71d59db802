"""CSV ingestion, chronological splits, z-scoring and sliding windows.

CSV grammar: a header row, an optional leading ``date`` column (kept as
strings), then one float column per channel. Every data row must have the
header's column count and every channel cell must parse as a finite float.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class CsvFormatError(ValueError):
    pass


@dataclass
class TimeSeriesFrame:
    channel_names: list[str]
    values: np.ndarray  # [T, C]
    timestamps: list[str] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"values must be [T, C], got shape {self.values.shape}")
        T, C = self.values.shape
        if T < 1 or C < 1:
            raise ValueError("a frame needs at least one row and one channel")
        if len(self.channel_names) != C:
            raise ValueError(f"{len(self.channel_names)} channel names for {C} channels")
        if self.timestamps is not None and len(self.timestamps) != T:
            raise ValueError("timestamps and values disagree on length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("frame contains NaN or Inf")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def C(self) -> int:
        return self.values.shape[1]

    def rows(self, start: int, stop: int) -> "TimeSeriesFrame":
        ts = self.timestamps[start:stop] if self.timestamps is not None else None
        return TimeSeriesFrame(list(self.channel_names), self.values[start:stop].copy(), ts)

    def with_values(self, values: np.ndarray) -> "TimeSeriesFrame":
        return TimeSeriesFrame(list(self.channel_names), values, self.timestamps)


def load_csv(path) -> TimeSeriesFrame:
    """Read a frame; errors carry the 1-based file line and the column name."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not any(cell.strip() for cell in rows[0]):
        raise CsvFormatError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    has_date = header[0].lower() == "date"
    names = header[1:] if has_date else header
    if not names:
        raise CsvFormatError(f"{path}: no channel columns")
    values, stamps = [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise CsvFormatError(f"{path}: row {line_no} has {len(row)} cells, header has {len(header)}")
        cells = row[1:] if has_date else row
        if has_date:
            stamps.append(row[0].strip())
        parsed = []
        for name, cell in zip(names, cells):
            try:
                v = float(cell)
            except ValueError:
                raise CsvFormatError(f"{path}: row {line_no}, column {name!r}: cannot parse {cell!r}") from None
            if not math.isfinite(v):
                raise CsvFormatError(f"{path}: row {line_no}, column {name!r}: missing or non-finite value {cell!r}")
            parsed.append(v)
        values.append(parsed)
    if not values:
        raise CsvFormatError(f"{path}: no data rows")
    return TimeSeriesFrame(names, np.array(values), stamps if has_date else None)


def save_csv(frame: TimeSeriesFrame, path) -> None:
    """Write with 17 significant digits so a reload is value-exact."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        has_date = frame.timestamps is not None
        w.writerow((["date"] if has_date else []) + list(frame.channel_names))
        for t in range(frame.T):
            row = ["%.17g" % v for v in frame.values[t]]
            w.writerow(([frame.timestamps[t]] if has_date else []) + row)


# ----------------------------------------------------------------------------
# splits and scaling
# ----------------------------------------------------------------------------


@dataclass
class SplitSpec:
    """Chronological train/val/test sizes, given as counts or as ratios of T."""

    train: float
    val: float
    test: float

    def lengths(self, T: int) -> tuple[int, int, int]:
        parts = (self.train, self.val, self.test)
        if any(p <= 0 for p in parts):
            raise ValueError("split sizes must be positive")
        if all(isinstance(p, float) and p <= 1.0 for p in parts):
            if sum(parts) > 1.0 + 1e-12:
                raise ValueError(f"split ratios sum to {sum(parts)} > 1")
            n_train = int(round(T * self.train))
            n_val = int(round(T * self.val))
            n_test = min(int(round(T * self.test)), T - n_train - n_val)
            out = (n_train, n_val, n_test)
        else:
            out = tuple(int(p) for p in parts)
        if sum(out) > T:
            raise ValueError(f"split {out} needs {sum(out)} rows but the frame has {T}")
        if min(out) < 1:
            raise ValueError(f"split {out} leaves an empty segment")
        return out


def chronological_split(frame: TimeSeriesFrame, spec: SplitSpec) -> tuple[TimeSeriesFrame, ...]:
    a, b, c = spec.lengths(frame.T)
    return frame.rows(0, a), frame.rows(a, a + b), frame.rows(a + b, a + b + c)


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray
    channel_names: list[str] = field(default_factory=list)

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return values * self.std + self.mean

    def inverse_channel_major(self, values: np.ndarray) -> np.ndarray:
        """Undo scaling on ``[..., C, L]`` model-orientation arrays."""
        return values * self.std[:, None] + self.mean[:, None]

    def to_json(self) -> str:
        return json.dumps(
            {"channel_names": self.channel_names, "mean": self.mean.tolist(), "std": self.std.tolist()}, indent=2
        )

    @classmethod
    def from_json(cls, text: str) -> "Scaler":
        d = json.loads(text)
        return cls(np.array(d["mean"]), np.array(d["std"]), d["channel_names"])


def standardize(train: TimeSeriesFrame, *others: TimeSeriesFrame) -> tuple[list[TimeSeriesFrame], Scaler]:
    """Z-score every frame with the training frame's per-channel mean and std."""
    mean = train.values.mean(axis=0)
    std = train.values.std(axis=0)
    for name, s in zip(train.channel_names, std):
        if not s > 0:
            raise ValueError(f"channel {name!r} has zero variance in the training split")
    scaler = Scaler(mean, std, list(train.channel_names))
    return [f.with_values(scaler.transform(f.values)) for f in (train, *others)], scaler


def windows(frame: TimeSeriesFrame | np.ndarray, I: int, O: int, stride: int = 1) -> list[tuple[np.ndarray, np.ndarray]]:
    """Sliding ``(input [C, I], target [C, O])`` pairs, ``floor((T-I-O)/stride) + 1`` of them."""
    values = frame.values if isinstance(frame, TimeSeriesFrame) else np.asarray(frame, dtype=np.float64)
    T = values.shape[0]
    if I < 1 or O < 1 or stride < 1:
        raise ValueError("I, O and stride must be >= 1")
    if T < I + O:
        raise ValueError(f"series of length {T} is shorter than I + O = {I + O}")
    count = (T - I - O) // stride + 1
    out = []
    for k in range(count):
        s = k * stride
        out.append((values[s : s + I].T.copy(), values[s + I : s + I + O].T.copy()))
    return out


def stack_windows(samples: Sequence[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([s[0] for s in samples]), np.stack([s[1] for s in samples])
