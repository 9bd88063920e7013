"""Design-matrix construction: calendar, lagged-load and difference features."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .dataset import Dataset, format_number, format_timestamp

CALENDAR_COLUMNS = ("dow", "doy", "day", "woy", "hour", "month")
LAG_COLUMNS = ("t_M24", "t_M48", "z_M24", "z_M48")
DIFF_COLUMNS = ("tzdif", "tdif", "zdif")
DEFAULT_COLUMNS = ("t", "z") + CALENDAR_COLUMNS + LAG_COLUMNS + DIFF_COLUMNS
LOOKBACK_HOURS = 48


class FeatureError(ValueError):
    pass


class UnknownColumnError(FeatureError, KeyError):
    def __str__(self):
        return f"unknown column {self.args[0]!r}"


@dataclass(frozen=True)
class FeatureConfig:
    enable_neighbor_shifts: bool = False
    enable_price_lag: bool = False
    dow_anchor: int = 0  # weekday (Monday=0) mapped to dow 0

    def __post_init__(self):
        if not 0 <= self.dow_anchor <= 6:
            raise FeatureError(f"dow_anchor must be in 0..6, got {self.dow_anchor}")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    columns: tuple[str, ...]
    values: np.ndarray  # (n_rows, n_columns)
    row_index: np.ndarray  # datetime64[h] per row
    target: Optional[np.ndarray] = None  # log price, NaN where price is absent

    def __post_init__(self):
        if self.values.shape != (len(self.row_index), len(self.columns)):
            raise FeatureError("values shape does not match row_index/columns")
        if self.target is not None and len(self.target) != len(self.row_index):
            raise FeatureError("target length does not match rows")

    def __len__(self) -> int:
        return len(self.row_index)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise UnknownColumnError(name) from None

    def select(self, names: Sequence[str]) -> np.ndarray:
        idx = []
        for name in names:
            if name not in self.columns:
                raise UnknownColumnError(name)
            idx.append(self.columns.index(name))
        return self.values[:, idx]

    def rows(self, mask) -> "FeatureMatrix":
        return FeatureMatrix(
            self.columns,
            self.values[mask],
            self.row_index[mask],
            None if self.target is None else self.target[mask],
        )

    def equals(self, other: "FeatureMatrix") -> bool:
        return (
            self.columns == other.columns
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.row_index, other.row_index)
            and (
                (self.target is None and other.target is None)
                or np.array_equal(self.target, other.target, equal_nan=True)
            )
        )

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("timestamp",) + self.columns + ("log_price",))
            for i in range(len(self)):
                y = "" if self.target is None or np.isnan(self.target[i]) else format_number(self.target[i])
                w.writerow(
                    [format_timestamp(self.row_index[i])] + [format_number(v) for v in self.values[i]] + [y]
                )


def calendar_features(ts, dow_anchor: int = 0) -> dict[str, int]:
    """Calendar integers for one hour-aligned instant."""
    one = calendar_arrays(np.array([np.datetime64(ts, "h")]), dow_anchor)
    return {k: int(v[0]) for k, v in one.items()}


def calendar_arrays(timestamps: np.ndarray, dow_anchor: int = 0) -> dict[str, np.ndarray]:
    idx = pd.DatetimeIndex(np.asarray(timestamps, dtype="datetime64[ns]"))
    return {
        "dow": (idx.dayofweek.to_numpy() - dow_anchor) % 7,
        "doy": idx.dayofyear.to_numpy() - 1,
        "day": idx.day.to_numpy(),
        "woy": idx.isocalendar().week.to_numpy().astype(np.int64),
        "hour": idx.hour.to_numpy(),
        "month": idx.month.to_numpy(),
    }


def lag_and_diff_features(ds: Dataset) -> FeatureMatrix:
    """Raw loads, their 24h/48h lags and differences; drops the first 48 rows."""
    n = len(ds)
    if n < LOOKBACK_HOURS + 1:
        raise FeatureError(f"insufficient history: need at least {LOOKBACK_HOURS + 1} rows, got {n}")
    t, z = ds.total_load, ds.zonal_load
    cur = np.s_[48:]
    m24 = np.s_[24 : n - 24]
    m48 = np.s_[: n - 48]
    cols = {
        "t": t[cur],
        "z": z[cur],
        "t_M24": t[m24],
        "t_M48": t[m48],
        "z_M24": z[m24],
        "z_M48": z[m48],
        "tzdif": t[cur] - z[cur],
        "tdif": t[cur] - t[m24],
        "zdif": z[cur] - z[m24],
    }
    names = tuple(cols)
    price = ds.price[cur]
    with np.errstate(invalid="ignore"):
        target = np.log(price)
    return FeatureMatrix(names, np.column_stack([cols[k] for k in names]), ds.timestamps[cur].copy(), target)


def neighbor_shifts(fm: FeatureMatrix, columns: Sequence[str] = DIFF_COLUMNS) -> FeatureMatrix:
    """Add ``c_P1`` (value one hour later) and ``c_N1`` (one hour earlier).

    The first and last rows have no neighbour on one side and are dropped.
    """
    if len(fm) > 1 and not np.all(np.diff(fm.row_index) == np.timedelta64(1, "h")):
        raise FeatureError("row index must be contiguous for neighbour shifts")
    if len(fm) < 3:
        return FeatureMatrix(
            fm.columns + tuple(f"{c}{s}" for c in columns for s in ("_P1", "_N1")),
            np.empty((0, len(fm.columns) + 2 * len(columns))),
            fm.row_index[:0],
            None if fm.target is None else fm.target[:0],
        )
    mid = np.s_[1:-1]
    extra, names = [], []
    for c in columns:
        v = fm.column(c)
        extra += [v[2:], v[:-2]]
        names += [f"{c}_P1", f"{c}_N1"]
    values = np.column_stack([fm.values[mid]] + extra)
    return FeatureMatrix(
        fm.columns + tuple(names),
        values,
        fm.row_index[mid],
        None if fm.target is None else fm.target[mid],
    )


def log_transform(price):
    p = np.asarray(price, dtype=np.float64)
    if np.any(~(p > 0)):
        raise ValueError("log_transform requires strictly positive prices")
    out = np.log(p)
    return float(out) if out.ndim == 0 else out


def inverse_log(x):
    out = np.exp(np.asarray(x, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


def design_columns(cfg: FeatureConfig = FeatureConfig()) -> tuple[str, ...]:
    """Column names ``build_design`` produces under ``cfg``."""
    cols = DEFAULT_COLUMNS + (("y_M24",) if cfg.enable_price_lag else ())
    if cfg.enable_neighbor_shifts:
        cols += tuple(f"{c}{s}" for c in DIFF_COLUMNS for s in ("_P1", "_N1"))
    return cols


def build_design(ds: Dataset, cfg: FeatureConfig = FeatureConfig()) -> FeatureMatrix:
    """Full design matrix with the log-price target."""
    base = lag_and_diff_features(ds)
    cal = calendar_arrays(base.row_index, cfg.dow_anchor)
    columns = ["t", "z", *CALENDAR_COLUMNS, *LAG_COLUMNS, *DIFF_COLUMNS]
    source = {name: base.column(name) for name in base.columns}
    source.update({k: v.astype(np.float64) for k, v in cal.items()})
    if cfg.enable_price_lag:
        with np.errstate(invalid="ignore"):
            source["y_M24"] = np.log(ds.price[24 : len(ds) - 24])
        columns.append("y_M24")
    fm = FeatureMatrix(
        tuple(columns), np.column_stack([source[c] for c in columns]), base.row_index, base.target
    )
    if cfg.enable_neighbor_shifts:
        fm = neighbor_shifts(fm)
    if cfg.enable_price_lag:
        fm = fm.rows(~np.isnan(fm.column("y_M24")))
    return fm
