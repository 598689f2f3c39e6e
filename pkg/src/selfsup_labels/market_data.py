"""Close-price ingestion and return computation."""

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import (
    BadRow,
    NonMonotoneTimestamps,
    NonPositivePrice,
    SchemaMismatch,
    SeriesTooShort,
)

logger = logging.getLogger(__name__)


def _frozen(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CsvSchema:
    date_column: str = "date"
    close_column: str = "close"


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Timestamped close prices.

    Timestamps are kept as the raw ISO strings read from disk so that
    re-emission is lossless; all arithmetic indexes by position.
    """

    timestamps: tuple
    prices: np.ndarray
    frequency_hint: str = "daily"
    skipped_rows: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "timestamps", tuple(str(t) for t in self.timestamps))
        object.__setattr__(self, "prices", _frozen(self.prices))
        validate_prices(self.timestamps, self.prices)

    def __len__(self):
        return len(self.prices)

    def __eq__(self, other):
        if not isinstance(other, PriceSeries):
            return NotImplemented
        return (
            self.timestamps == other.timestamps
            and self.frequency_hint == other.frequency_hint
            and np.array_equal(self.prices, other.prices)
        )

    @classmethod
    def from_values(cls, prices, start="2000-01-01", frequency_hint="daily"):
        """Build a series with synthetic daily ISO dates, for tests and fixtures."""
        base = np.datetime64(start, "D")
        stamps = [str(base + i) for i in range(len(prices))]
        return cls(stamps, prices, frequency_hint)

    def replace_prices(self, prices):
        return PriceSeries(self.timestamps, prices, self.frequency_hint)


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """values[t] is the return realised at original index t+1."""

    values: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in ("simple", "log"):
            raise ValueError(f"unknown return kind {self.kind!r}")
        object.__setattr__(self, "values", _frozen(self.values))

    def __len__(self):
        return len(self.values)

    def negated(self):
        return ReturnSeries(-self.values, self.kind)


def parse_timestamp(text):
    return datetime.fromisoformat(text.strip().replace("Z", "+00:00"))


def validate_prices(timestamps, prices):
    if len(prices) < 2:
        raise SeriesTooShort(f"need at least 2 prices, got {len(prices)}")
    if len(timestamps) != len(prices):
        raise ValueError("timestamps and prices differ in length")
    bad = np.flatnonzero(~(np.isfinite(prices) & (prices > 0)))
    if bad.size:
        raise NonPositivePrice(int(bad[0]), float(prices[bad[0]]))
    parsed = [parse_timestamp(t) for t in timestamps]
    for i in range(1, len(parsed)):
        if not parsed[i] > parsed[i - 1]:
            raise NonMonotoneTimestamps(i)


def ingest_csv(path, schema=None, skip_bad_rows=False, frequency_hint="daily"):
    """Read a close-price CSV into a validated PriceSeries.

    Row indices in errors are 0-based data rows (the header is not counted).
    With ``skip_bad_rows`` unparseable rows are dropped and counted instead of
    raising; invariant violations (non-positive prices, non-monotone
    timestamps) always raise.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")

    stamps, prices = [], []
    skipped = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (schema.date_column, schema.close_column):
            if col not in header:
                raise SchemaMismatch(f"column {col!r} absent from header {header}")
        for i, row in enumerate(reader):
            raw_t = (row.get(schema.date_column) or "").strip()
            raw_p = (row.get(schema.close_column) or "").strip()
            try:
                parse_timestamp(raw_t)
                price = float(raw_p)
                if math.isnan(price):
                    raise ValueError("NaN price")
            except (ValueError, TypeError) as exc:
                if skip_bad_rows:
                    skipped += 1
                    continue
                raise BadRow(i, exc) from None
            stamps.append(raw_t)
            prices.append(price)

    if skipped:
        logger.warning("skipped %d unparseable rows in %s", skipped, path)
    if len(prices) < 2:
        raise SeriesTooShort(f"{path}: fewer than 2 parseable rows")
    series = PriceSeries(stamps, prices, frequency_hint)
    object.__setattr__(series, "skipped_rows", skipped)
    return series


def write_csv(series, path, schema=None):
    schema = schema or CsvSchema()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([schema.date_column, schema.close_column])
        for t, p in zip(series.timestamps, series.prices):
            writer.writerow([t, repr(float(p))])


def simple_returns(series):
    x = series.prices
    return ReturnSeries((x[1:] - x[:-1]) / x[:-1], "simple")


def log_returns(series):
    return ReturnSeries(np.diff(np.log(series.prices)), "log")


def log_returns_of(prices):
    """Log returns of a bare positive array (no timestamp validation)."""
    prices = np.asarray(prices, dtype=float)
    return ReturnSeries(np.diff(np.log(prices)), "log")
