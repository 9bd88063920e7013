"""Descriptive statistics, correlation, histograms and autocorrelation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset, format_number


class StatsError(ValueError):
    pass


def percent_label(q: float) -> str:
    return f"{q * 100:g}%"


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    std: float
    min: float
    max: float
    quantiles: Mapping[float, float] = field(default_factory=dict)

    @property
    def q25(self) -> float:
        return self.quantiles[0.25]

    @property
    def q50(self) -> float:
        return self.quantiles[0.5]

    @property
    def q75(self) -> float:
        return self.quantiles[0.75]

    def rows(self) -> list[tuple[str, float]]:
        """(label, value) pairs in table order: count, mean, std, min, quantiles..., max."""
        out = [("count", float(self.count)), ("mean", self.mean), ("std", self.std), ("min", self.min)]
        out += [(percent_label(q), v) for q, v in sorted(self.quantiles.items())]
        out.append(("max", self.max))
        return out

    def to_dict(self) -> dict[str, float]:
        return {k: (int(v) if k == "count" else v) for k, v in self.rows()}


@dataclass(frozen=True)
class AcfResult:
    lags: np.ndarray
    values: np.ndarray


def quantile(x: np.ndarray, q: float) -> float:
    """Linear interpolation between order statistics (type 7)."""
    xs = np.sort(np.asarray(x, dtype=np.float64))
    h = (len(xs) - 1) * q
    lo = int(np.floor(h))
    hi = min(lo + 1, len(xs) - 1)
    return float(xs[lo] + (h - lo) * (xs[hi] - xs[lo]))


def describe(series: Sequence[float], percentiles: Sequence[float] = (0.25, 0.5, 0.75)) -> SummaryStats:
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        raise StatsError("describe needs a nonempty series")
    n = len(x)
    mean = float(np.mean(x))
    std = float(np.std(x, ddof=1)) if n > 1 else 0.0
    return SummaryStats(
        count=n,
        mean=mean,
        std=std,
        min=float(np.min(x)),
        max=float(np.max(x)),
        quantiles={float(q): quantile(x, q) for q in percentiles},
    )


def pearson_corr(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) != len(b) or len(a) < 2:
        raise StatsError("pearson_corr needs two equal-length series of length >= 2")
    da, db = a - a.mean(), b - b.mean()
    sa, sb = np.sqrt(np.dot(da, da)), np.sqrt(np.dot(db, db))
    if sa == 0 or sb == 0:
        raise StatsError("correlation undefined for a constant series")
    return float(np.clip(np.dot(da, db) / (sa * sb), -1.0, 1.0))


def correlation_matrix(columns: Mapping[str, Sequence[float]]) -> tuple[list[str], np.ndarray]:
    names = list(columns)
    k = len(names)
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = pearson_corr(columns[names[i]], columns[names[j]])
    return names, out


def acf(series: Sequence[float], max_lag: int) -> AcfResult:
    """Biased sample autocorrelation with the global mean, lags 0..max_lag."""
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    if max_lag < 0 or n <= max_lag:
        raise StatsError(f"acf needs more than max_lag={max_lag} observations, got {n}")
    d = x - x.mean()
    denom = np.dot(d, d)
    if denom == 0:
        raise StatsError("acf undefined for a constant series")
    values = np.array([np.dot(d[: n - k], d[k:]) / denom for k in range(max_lag + 1)])
    return AcfResult(np.arange(max_lag + 1), values)


def hourly_acf(ds: Dataset, hour: int, max_day_lag: int) -> AcfResult:
    """ACF of the price observed at one hour of day, lags counted in days."""
    if not 0 <= hour <= 23:
        raise StatsError(f"hour must be in 0..23, got {hour}")
    hours = (ds.timestamps - ds.timestamps.astype("datetime64[D]")).astype(np.int64)
    x = ds.price[(hours == hour) & ds.has_price]
    if len(x) < max_day_lag + 2:
        raise StatsError(f"need at least {max_day_lag + 2} days of prices at hour {hour}, got {len(x)}")
    return acf(x, max_day_lag)


def histogram(series: Sequence[float], bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width bins over [min, max]; the last bin is closed on the right."""
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0 or bins < 1:
        raise StatsError("histogram needs a nonempty series and bins >= 1")
    counts, edges = np.histogram(x, bins=bins)
    return edges, counts


def write_summary_csv(stats: Mapping[str, SummaryStats], path) -> None:
    names = list(stats)
    labels = [k for k, _ in stats[names[0]].rows()]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["statistic"] + names)
        for i, label in enumerate(labels):
            w.writerow([label] + [format_number(stats[n].rows()[i][1]) for n in names])


def write_matrix_csv(names: Sequence[str], matrix: np.ndarray, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(names))
        for name, row in zip(names, matrix):
            w.writerow([name] + [format_number(v) for v in row])


def write_acf_csv(res: AcfResult, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("lag", "value"))
        for k, v in zip(res.lags, res.values):
            w.writerow((int(k), format_number(v)))


def write_histogram_csv(hists: Mapping[str, tuple[np.ndarray, np.ndarray]], path, with_variable: bool) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow((["variable"] if with_variable else []) + ["left_edge", "right_edge", "count"])
        for name, (edges, counts) in hists.items():
            for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                w.writerow(([name] if with_variable else []) + [format_number(lo), format_number(hi), int(c)])
