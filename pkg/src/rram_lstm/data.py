"""Airline-passenger series: loading, min-max scaling, one-step-ahead pairs."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

CANONICAL_LENGTH = 144
SPLIT_INDEX = 96


class DataError(ValueError):
    pass


def default_data_path() -> Path:
    return Path(str(resources.files("rram_lstm") / "data" / "airline_passengers.csv"))


def load_series(path, strict: bool = False) -> np.ndarray:
    """Read monthly passenger counts from a CSV whose last field is the count.

    A non-numeric first row is treated as a header. A series whose length is
    not 144 triggers a warning, or a :class:`DataError` when ``strict``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    values = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            field = row[-1].strip()
            try:
                count = float(field)
            except ValueError:
                if lineno == 1 and not values:
                    continue
                raise DataError(f"{path}:{lineno}: cannot parse passenger count {field!r}") from None
            if not count > 0 or count != int(count):
                raise DataError(f"{path}:{lineno}: passenger count must be a positive integer, got {field!r}")
            values.append(int(count))
    if len(values) != CANONICAL_LENGTH:
        msg = f"{path}: expected {CANONICAL_LENGTH} observations, found {len(values)}"
        if strict:
            raise DataError(msg)
        warnings.warn(msg, stacklevel=2)
    return np.asarray(values, dtype=float)


def normalize(raw) -> tuple[np.ndarray, float, float]:
    raw = np.asarray(raw, dtype=float)
    if raw.size < 2:
        raise DataError("need at least two observations to normalize")
    lo, hi = float(raw.min()), float(raw.max())
    if hi == lo:
        raise DataError("cannot normalize a constant series")
    return (raw - lo) / (hi - lo), lo, hi


@dataclass(frozen=True)
class TimeSeriesDataset:
    raw: np.ndarray
    normalized: np.ndarray
    norm_min: float
    norm_max: float
    split_index: int = SPLIT_INDEX

    @classmethod
    def from_raw(cls, raw, split_index: int = SPLIT_INDEX) -> TimeSeriesDataset:
        norm, lo, hi = normalize(raw)
        if not 2 <= split_index < len(norm):
            raise DataError(f"split index {split_index} out of range for {len(norm)} observations")
        return cls(np.asarray(raw, dtype=float), norm, lo, hi, split_index)

    @classmethod
    def load(cls, path=None, strict: bool = False) -> TimeSeriesDataset:
        return cls.from_raw(load_series(path or default_data_path(), strict=strict))


@dataclass(frozen=True)
class Pairs:
    """One-step-ahead supervised pairs; ``index`` is the target's position."""

    inputs: np.ndarray
    targets: np.ndarray
    index: np.ndarray

    def __len__(self) -> int:
        return len(self.inputs)


def make_supervised(ds: TimeSeriesDataset) -> tuple[Pairs, Pairs]:
    """Train pairs inside the first ``split_index`` points, test pairs for the rest.

    Test inputs start at the last training observation so that every
    observation after the split is a target.
    """
    x = ds.normalized
    s = ds.split_index
    train = Pairs(x[: s - 1], x[1:s], np.arange(1, s))
    test = Pairs(x[s - 1 : -1], x[s:], np.arange(s, len(x)))
    return train, test


def denormalize(y, ds: TimeSeriesDataset):
    return y * (ds.norm_max - ds.norm_min) + ds.norm_min


def mse(pred, target) -> float:
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape or pred.size == 0:
        raise DataError(f"length mismatch: {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


def rmse(pred, actual) -> float:
    return float(np.sqrt(mse(pred, actual)))
