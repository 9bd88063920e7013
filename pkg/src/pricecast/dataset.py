"""Hourly price/load series: loading, validation and slicing.

The canonical CSV layout is::

    timestamp,price,total_load,zonal_load
    2013-02-19T14:00,42.86,18067,6075

``price`` may be empty on trailing rows (the forecast horizon).
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

HEADER = ("timestamp", "price", "total_load", "zonal_load")
GEFCOM_HEADER = ("ZONEID", "timestamp", "Forecasted Total Load", "Forecasted Zonal Load", "Zonal Price")

ONE_HOUR = np.timedelta64(1, "h")
_DECIMAL = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)$")
_TIMESTAMP = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}$")


class DatasetError(ValueError):
    """Raised for malformed input or violated dataset invariants."""

    def __init__(self, reason: str, row: Optional[int] = None):
        self.reason = reason
        self.row = row
        msg = reason if row is None else f"row {row}: {reason}"
        super().__init__(msg)


@dataclass(frozen=True)
class HourlyRecord:
    timestamp: datetime
    price: Optional[float]
    zonal_load: float
    total_load: float


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


class Dataset:
    """Immutable, contiguous hourly series.

    Columns are held as read-only numpy arrays; absent prices are NaN and
    may only occur on a trailing block of rows.
    """

    __slots__ = ("timestamps", "price", "total_load", "zonal_load")

    def __init__(self, timestamps, price, total_load, zonal_load):
        ts = np.asarray(timestamps, dtype="datetime64[h]")
        price = np.asarray(price, dtype=np.float64)
        total = np.asarray(total_load, dtype=np.float64)
        zonal = np.asarray(zonal_load, dtype=np.float64)
        if not (len(ts) == len(price) == len(total) == len(zonal)):
            raise DatasetError("column lengths differ")
        _validate(ts, price, total, zonal)
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "price", _frozen(price))
        object.__setattr__(self, "total_load", _frozen(total))
        object.__setattr__(self, "zonal_load", _frozen(zonal))

    def __setattr__(self, name, value):
        raise AttributeError("Dataset is immutable")

    def __len__(self) -> int:
        return len(self.timestamps)

    def __iter__(self) -> Iterator[HourlyRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.price, other.price, equal_nan=True)
            and np.array_equal(self.total_load, other.total_load)
            and np.array_equal(self.zonal_load, other.zonal_load)
        )

    def __getstate__(self):
        return (self.timestamps, self.price, self.total_load, self.zonal_load)

    def __setstate__(self, state):
        for name, value in zip(self.__slots__, state):
            object.__setattr__(self, name, value)

    def __repr__(self) -> str:
        if len(self) == 0:
            return "Dataset(empty)"
        return f"Dataset({len(self)} rows, {self.start} .. {self.end})"

    def record(self, i: int) -> HourlyRecord:
        p = self.price[i]
        return HourlyRecord(
            timestamp=self.timestamps[i].astype(datetime),
            price=None if np.isnan(p) else float(p),
            zonal_load=float(self.zonal_load[i]),
            total_load=float(self.total_load[i]),
        )

    @property
    def start(self) -> np.datetime64:
        return self.timestamps[0]

    @property
    def end(self) -> np.datetime64:
        return self.timestamps[-1]

    @property
    def span(self) -> tuple[np.datetime64, np.datetime64]:
        return self.start, self.end

    @property
    def has_price(self) -> np.ndarray:
        return ~np.isnan(self.price)

    def index_of(self, ts) -> int:
        """Row position of an hour-aligned instant inside the span."""
        ts = np.datetime64(ts, "h")
        k = int((ts - self.start) / ONE_HOUR)
        if k < 0 or k >= len(self):
            raise DatasetError(f"{ts} outside dataset span {self.start} .. {self.end}")
        return k

    def iloc(self, lo: int, hi: int) -> "Dataset":
        """Rows ``lo`` (inclusive) to ``hi`` (exclusive)."""
        return Dataset(
            self.timestamps[lo:hi], self.price[lo:hi], self.total_load[lo:hi], self.zonal_load[lo:hi]
        )


def _validate(ts, price, total, zonal) -> None:
    n = len(ts)
    if n == 0:
        raise DatasetError("empty dataset")
    if np.isnat(ts).any():
        raise DatasetError("missing timestamp", int(np.argmax(np.isnat(ts))) + 1)
    step = np.diff(ts)
    bad = np.flatnonzero(step != ONE_HOUR)
    if len(bad):
        i = int(bad[0])
        if step[i] == np.timedelta64(0, "h"):
            raise DatasetError(f"duplicate timestamp {ts[i + 1]}", i + 2)
        if step[i] < np.timedelta64(0, "h"):
            raise DatasetError("timestamps not increasing", i + 2)
        raise DatasetError(f"gap in hourly grid between {ts[i]} and {ts[i + 1]}", i + 2)
    for name, col in (("total_load", total), ("zonal_load", zonal)):
        bad = np.flatnonzero(~(col > 0) | ~np.isfinite(col))
        if len(bad):
            raise DatasetError(f"{name} must be positive and finite", int(bad[0]) + 1)
    missing = np.isnan(price)
    bad = np.flatnonzero(~missing & ~(price > 0) | np.isinf(price))
    if len(bad):
        raise DatasetError("price must be positive", int(bad[0]) + 1)
    if missing.any():
        first = int(np.argmax(missing))
        if not missing[first:].all():
            raise DatasetError("missing price inside the series (only trailing rows may be empty)", first + 1)


def _parse_number(text: str, row: int, field: str) -> float:
    text = text.strip()
    if not _DECIMAL.match(text):
        raise DatasetError(f"non-numeric {field} {text!r}", row)
    return float(text)


def _parse_timestamp(text: str, row: int) -> np.datetime64:
    text = text.strip()
    if not _TIMESTAMP.match(text):
        raise DatasetError(f"malformed timestamp {text!r}", row)
    try:
        dt = datetime.strptime(text, "%Y-%m-%dT%H:%M")
    except ValueError:
        raise DatasetError(f"malformed timestamp {text!r}", row) from None
    if dt.minute != 0:
        raise DatasetError(f"timestamp {text!r} is not hour-aligned", row)
    return np.datetime64(dt, "h")


def _parse_gefcom_timestamp(text: str, row: int) -> np.datetime64:
    # mddyyyy H:MM, hour-ending convention (1:00 .. 24:00 / 0:00); shift to hour-beginning
    text = text.strip()
    try:
        date_part, time_part = text.split()
        date_part = date_part.zfill(8)
        day = datetime.strptime(date_part, "%m%d%Y")
        hh, mm = time_part.split(":")
        hour, minute = int(hh), int(mm)
    except ValueError:
        raise DatasetError(f"malformed GEFCOM timestamp {text!r}", row) from None
    if minute != 0 or not 0 <= hour <= 24:
        raise DatasetError(f"malformed GEFCOM timestamp {text!r}", row)
    if hour == 0:
        hour = 24
    return np.datetime64(day, "h") + np.timedelta64(hour - 1, "h")


def _from_rows(rows: list[tuple[int, np.datetime64, float, float, float]]) -> Dataset:
    if not rows:
        raise DatasetError("empty dataset (header only)")
    order = sorted(range(len(rows)), key=lambda k: rows[k][1])
    rows = [rows[k] for k in order]
    for prev, cur in zip(rows, rows[1:]):
        if cur[1] == prev[1]:
            raise DatasetError(f"duplicate timestamp {cur[1]}", cur[0])
        if cur[1] - prev[1] != ONE_HOUR:
            raise DatasetError(f"gap in hourly grid between {prev[1]} and {cur[1]}", cur[0])
    missing = [r for r in rows if np.isnan(r[2])]
    if missing:
        first_missing = rows.index(missing[0])
        if any(not np.isnan(r[2]) for r in rows[first_missing:]):
            raise DatasetError("missing price inside the series (only trailing rows may be empty)", missing[0][0])
    for r in rows:
        if not np.isnan(r[2]) and r[2] <= 0:
            raise DatasetError("price must be positive", r[0])
        if r[3] <= 0 or r[4] <= 0:
            raise DatasetError("loads must be positive", r[0])
    return Dataset(
        [r[1] for r in rows], [r[2] for r in rows], [r[3] for r in rows], [r[4] for r in rows]
    )


def load_csv(path, gefcom: bool = False) -> Dataset:
    """Read and validate a dataset file.

    With ``gefcom=True`` the raw competition price-track layout
    (``ZONEID,timestamp,Forecasted Total Load,Forecasted Zonal Load,Zonal Price``)
    is accepted instead of the canonical header. Row numbers in errors count
    data rows from 1.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetError("empty file (no header)")
        header = [h.strip().lstrip("﻿") for h in header]
        rows = []
        if gefcom:
            try:
                cols = [header.index(name) for name in GEFCOM_HEADER[1:]]
            except ValueError:
                raise DatasetError(f"expected GEFCOM header {','.join(GEFCOM_HEADER)}") from None
            for k, line in enumerate(reader, start=1):
                if not line:
                    continue
                if len(line) < len(header):
                    raise DatasetError("too few fields", k)
                ts = _parse_gefcom_timestamp(line[cols[0]], k)
                total = _parse_number(line[cols[1]], k, "total_load")
                zonal = _parse_number(line[cols[2]], k, "zonal_load")
                p = line[cols[3]].strip()
                price = np.nan if p in ("", "NA") else _parse_number(p, k, "price")
                rows.append((k, ts, price, total, zonal))
        else:
            if tuple(header) != HEADER:
                raise DatasetError(f"expected header {','.join(HEADER)}, got {','.join(header)}")
            for k, line in enumerate(reader, start=1):
                if not line:
                    continue
                if len(line) != 4:
                    raise DatasetError(f"expected 4 fields, got {len(line)}", k)
                ts = _parse_timestamp(line[0], k)
                p = line[1].strip()
                price = np.nan if p == "" else _parse_number(p, k, "price")
                total = _parse_number(line[2], k, "total_load")
                zonal = _parse_number(line[3], k, "zonal_load")
                rows.append((k, ts, price, total, zonal))
    return _from_rows(rows)


def format_number(x: float) -> str:
    """Shortest round-tripping plain decimal text (never scientific)."""
    return np.format_float_positional(x, trim="-")


def format_timestamp(ts) -> str:
    return str(np.datetime64(ts, "m"))


def write_csv(ds: Dataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for ts, p, t, z in zip(ds.timestamps, ds.price, ds.total_load, ds.zonal_load):
            w.writerow(
                [format_timestamp(ts), "" if np.isnan(p) else format_number(p), format_number(t), format_number(z)]
            )


def slice(ds: Dataset, start, end) -> Dataset:  # noqa: A001 - mirrors the documented operation name
    """Records with ``start <= timestamp <= end``."""
    start, end = np.datetime64(start, "h"), np.datetime64(end, "h")
    if start > end:
        raise DatasetError(f"slice start {start} after end {end}")
    if start < ds.start or end > ds.end:
        raise DatasetError(f"slice {start} .. {end} outside dataset span {ds.start} .. {ds.end}")
    lo = ds.index_of(start)
    hi = ds.index_of(end) + 1
    return ds.iloc(lo, hi)
