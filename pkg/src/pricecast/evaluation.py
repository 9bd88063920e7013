"""Rolling-window backtest of ARMAX and GBR, error aggregation and the trimmed t-test."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps

from . import armax, gbrt
from .dataset import Dataset, format_number, format_timestamp
from .features import LOOKBACK_HOURS, FeatureConfig, build_design, design_columns
from .stats import SummaryStats, describe

# Full design minus columns that are exact linear combinations of others
# (tzdif, tdif, zdif) or (near-)constant inside a 30-day window (month, day, woy).
ARMAX_EXOG = ("t", "z", "t_M24", "t_M48", "z_M24", "z_M48", "dow", "doy", "hour")
TABLE5_PERCENTILES = (0.05, 0.5, 0.95)
METRICS = ("mae_p_armax", "rmse_p_armax", "mae_p_gbr", "rmse_p_gbr")
HOUR = np.timedelta64(1, "h")
DAY = np.timedelta64(24, "h")


class BacktestError(ValueError):
    pass


@dataclass(frozen=True)
class BacktestConfig:
    train_window_days: int = 30
    horizon_hours: int = 24
    test_start: Optional[str] = None  # first test day, YYYY-MM-DD; default: earliest feasible
    test_end: Optional[str] = None  # last test day (inclusive); default: last day with all prices
    armax_spec: armax.ArmaxSpec = field(default_factory=lambda: armax.ArmaxSpec(2, 1, len(ARMAX_EXOG)))
    armax_exog: tuple[str, ...] = ARMAX_EXOG
    gbrt_params: gbrt.GbrtParams = field(default_factory=gbrt.GbrtParams)
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)

    def __post_init__(self):
        if self.train_window_days < 2:
            raise BacktestError(f"train_window_days must be at least 2, got {self.train_window_days}")
        if self.horizon_hours != 24:
            raise BacktestError("horizon_hours is fixed at 24")
        if self.armax_spec.b != len(self.armax_exog):
            raise BacktestError(
                f"armax_spec.b={self.armax_spec.b} but {len(self.armax_exog)} exogenous columns were given"
            )
        available = design_columns(self.feature_config)
        unknown = [c for c in self.armax_exog if c not in available]
        if unknown:
            raise BacktestError(f"unknown ARMAX exogenous column(s) {unknown}; valid: {', '.join(available)}")

    @property
    def lookback_hours(self) -> int:
        return LOOKBACK_HOURS + (1 if self.feature_config.enable_neighbor_shifts else 0)

    @property
    def lookahead_hours(self) -> int:
        return 1 if self.feature_config.enable_neighbor_shifts else 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class DayResult:
    date: np.datetime64
    mae_armax: float
    rmse_armax: float
    mae_gbr: float
    rmse_gbr: float
    armax_converged: bool
    actuals: np.ndarray
    forecast_armax: np.ndarray
    forecast_gbr: np.ndarray
    mae_persistence: float
    rmse_persistence: float
    gbr_importances: dict = field(default_factory=dict, repr=False)

    def same_as(self, other: "DayResult") -> bool:
        return (
            self.date == other.date
            and self.armax_converged == other.armax_converged
            and all(
                np.array_equal(getattr(self, k), getattr(other, k), equal_nan=True)
                for k in (
                    "mae_armax", "rmse_armax", "mae_gbr", "rmse_gbr", "actuals",
                    "forecast_armax", "forecast_gbr", "mae_persistence", "rmse_persistence",
                )
            )
        )


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    p_value: float
    df: float
    n_a: int
    n_b: int
    paired: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ComparisonReport:
    day_results: tuple
    aggregate: dict  # metric name -> SummaryStats
    ttest: Optional[TTestResult]
    ttest_mae: Optional[TTestResult]
    improvement_pct: float
    persistence: dict
    trim: float = 0.05

    @property
    def n_days(self) -> int:
        return len(self.day_results)

    @property
    def n_converged(self) -> int:
        return sum(r.armax_converged for r in self.day_results)

    def to_dict(self) -> dict:
        return {
            "n_days": self.n_days,
            "n_converged": self.n_converged,
            "excluded_days": [str(r.date) for r in self.day_results if not r.armax_converged],
            "metrics": {k: _clean(v.to_dict()) for k, v in self.aggregate.items()},
            "ttest": {
                "trim_fraction": self.trim,
                "rmse": None if self.ttest is None else _clean(self.ttest.to_dict()),
                "mae": None if self.ttest_mae is None else _clean(self.ttest_mae.to_dict()),
            },
            "improvement_pct": _num(self.improvement_pct),
            "baseline": {"persistence": _clean(self.persistence)},
        }


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return x if math.isfinite(x) else None


def _clean(d: dict) -> dict:
    return {k: _num(v) for k, v in d.items()}


def mae(forecast, actual) -> float:
    f, a = np.asarray(forecast, dtype=np.float64), np.asarray(actual, dtype=np.float64)
    if f.shape != a.shape or f.size == 0:
        raise BacktestError("mae needs equal-length nonempty sequences")
    return float(np.mean(np.abs(f - a)))


def rmse(forecast, actual) -> float:
    f, a = np.asarray(forecast, dtype=np.float64), np.asarray(actual, dtype=np.float64)
    if f.shape != a.shape or f.size == 0:
        raise BacktestError("rmse needs equal-length nonempty sequences")
    return float(np.sqrt(np.mean((f - a) ** 2)))


def candidate_days(start, end) -> np.ndarray:
    """Calendar days from ``start`` to ``end`` inclusive."""
    start, end = np.datetime64(start, "D"), np.datetime64(end, "D")
    if end < start:
        return np.array([], dtype="datetime64[D]")
    return np.arange(start, end + np.timedelta64(1, "D"), dtype="datetime64[D]")


def resolve_test_days(ds: Dataset, cfg: BacktestConfig) -> np.ndarray:
    """Resolve and validate the test range; raises before any model is fitted."""
    need_before = np.timedelta64(cfg.train_window_days * 24 + cfg.lookback_hours, "h")
    need_after = np.timedelta64(23 + cfg.lookahead_hours, "h")
    if cfg.test_start is None:
        first = (ds.start + need_before).astype("datetime64[D]")
        if first.astype("datetime64[h]") - need_before < ds.start:
            first += np.timedelta64(1, "D")
    else:
        first = np.datetime64(cfg.test_start, "D")
    priced = ds.timestamps[ds.has_price]
    if len(priced) == 0:
        raise BacktestError("dataset has no prices")
    if cfg.test_end is None:
        last = (priced[-1] - np.timedelta64(23, "h")).astype("datetime64[D]")
        if last.astype("datetime64[h]") + need_after > ds.end:
            last -= np.timedelta64(1, "D")
    else:
        last = np.datetime64(cfg.test_end, "D")
    if last < first:
        raise BacktestError(f"empty test range {first} .. {last}")
    lo = first.astype("datetime64[h]") - need_before
    if lo < ds.start:
        raise BacktestError(f"test start {first} needs data from {lo}, dataset starts {ds.start}")
    hi = last.astype("datetime64[h]") + need_after
    if hi > ds.end:
        raise BacktestError(f"test end {last} needs data until {hi}, dataset ends {ds.end}")
    last_hour = last.astype("datetime64[h]") + np.timedelta64(23, "h")
    if last_hour > priced[-1]:
        raise BacktestError(f"prices are known only until {priced[-1]}, test end {last} needs {last_hour}")
    return candidate_days(first, last)


def backtest_day(ds: Dataset, cfg: BacktestConfig, day) -> DayResult:
    """Train both models on the window before ``day`` and score its 24 hours."""
    d0 = np.datetime64(day, "D").astype("datetime64[h]")
    window = np.timedelta64(cfg.train_window_days * 24, "h")
    lo = ds.index_of(d0 - window - np.timedelta64(cfg.lookback_hours, "h"))
    hi = ds.index_of(d0 + np.timedelta64(23 + cfg.lookahead_hours, "h")) + 1
    sub = ds.iloc(lo, hi)
    fm = build_design(sub, cfg.feature_config)
    train_mask = (fm.row_index >= d0 - window) & (fm.row_index < d0)
    test_mask = (fm.row_index >= d0) & (fm.row_index < d0 + DAY)
    train, test = fm.rows(train_mask), fm.rows(test_mask)
    if len(train) != cfg.train_window_days * 24 or len(test) != 24:
        raise BacktestError(f"{day}: incomplete design ({len(train)} train rows, {len(test)} test rows)")
    y = train.target

    model_g = gbrt.fit(train, y, cfg.gbrt_params)
    fc_gbr = np.exp(gbrt.predict(model_g, test))

    model_a = armax.fit(y, train.select(cfg.armax_exog), cfg.armax_spec)
    if model_a.converged:
        log_fc = armax.forecast(model_a, y, model_a.resid, test.select(cfg.armax_exog), 24)
        fc_armax = np.exp(log_fc)
    else:
        fc_armax = np.full(24, np.nan)

    k = ds.index_of(d0)
    actual = ds.price[k : k + 24].copy()
    persist = ds.price[k - 24 : k]
    if model_a.converged:
        ma, ra = mae(fc_armax, actual), rmse(fc_armax, actual)
    else:
        ma = ra = float("nan")
    return DayResult(
        date=np.datetime64(day, "D"),
        mae_armax=ma,
        rmse_armax=ra,
        mae_gbr=mae(fc_gbr, actual),
        rmse_gbr=rmse(fc_gbr, actual),
        armax_converged=bool(model_a.converged),
        actuals=actual,
        forecast_armax=fc_armax,
        forecast_gbr=fc_gbr,
        mae_persistence=mae(persist, actual),
        rmse_persistence=rmse(persist, actual),
        gbr_importances=gbrt.feature_importances(model_g),
    )


def run_backtest(ds: Dataset, cfg: BacktestConfig = BacktestConfig(), jobs: int = 1) -> list[DayResult]:
    """Results are returned in date order whatever the worker count."""
    days = resolve_test_days(ds, cfg)
    work = partial(backtest_day, ds, cfg)
    if jobs <= 1 or len(days) < 2:
        return [work(d) for d in days]
    chunk = max(1, len(days) // (jobs * 4))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, days, chunksize=chunk))


def trim_count(n: int, fraction: float = 0.05) -> int:
    """Order statistics dropped from each end: floor(fraction * n)."""
    return int(math.floor(round(fraction * n, 9)))


def trim(x, fraction: float = 0.05) -> np.ndarray:
    xs = np.sort(np.asarray(x, dtype=np.float64))
    k = trim_count(len(xs), fraction)
    return xs[k : len(xs) - k]


def welch_ttest(a, b) -> TTestResult:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise BacktestError("t-test needs at least 2 observations per sample")
    va, vb = a.var(ddof=1) / na, b.var(ddof=1) / nb
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0:
        t = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        df = float(na + nb - 2)
    else:
        t = float(diff / math.sqrt(se2))
        df = float(se2**2 / (va**2 / (na - 1) + vb**2 / (nb - 1)))
    p = float(min(1.0, 2.0 * sps.t.sf(abs(t), df)))
    return TTestResult(t, p, df, na, nb)


def paired_ttest(d) -> TTestResult:
    d = np.asarray(d, dtype=np.float64)
    n = len(d)
    if n < 2:
        raise BacktestError("t-test needs at least 2 paired observations")
    sd = d.std(ddof=1)
    m = d.mean()
    if sd == 0:
        t = 0.0 if m == 0 else math.copysign(math.inf, m)
    else:
        t = float(m / (sd / math.sqrt(n)))
    df = float(n - 1)
    p = float(min(1.0, 2.0 * sps.t.sf(abs(t), df)))
    return TTestResult(t, p, df, n, n, paired=True)


def trimmed_ttest(a, b, fraction: float = 0.05, paired: bool = False) -> TTestResult:
    """Drop each sample's top and bottom ``fraction`` then test for equal means.

    By default each sample is trimmed on its own and compared with Welch's
    two-sample test. ``paired=True`` instead trims the day-wise differences
    and runs a one-sample t-test on them.
    """
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if len(a) != len(b):
        raise BacktestError("trimmed_ttest expects day-paired sequences of equal length")
    if paired:
        d = trim(a - b, fraction)
        if len(d) < 2:
            raise BacktestError("fewer than 2 observations survive trimming")
        return paired_ttest(d)
    ta, tb = trim(a, fraction), trim(b, fraction)
    if len(ta) < 2 or len(tb) < 2:
        raise BacktestError("fewer than 2 observations survive trimming")
    return welch_ttest(ta, tb)


def aggregate(results: Sequence[DayResult], fraction: float = 0.05, paired: bool = False) -> ComparisonReport:
    """Per-metric summary (count, mean, std, min, 5%, 50%, 95%, max) over days where ARMAX converged."""
    ok = [r for r in results if r.armax_converged]
    if len(ok) < 2:
        raise BacktestError(f"need at least 2 converged days, got {len(ok)}")
    cols = {
        "mae_p_armax": np.array([r.mae_armax for r in ok]),
        "rmse_p_armax": np.array([r.rmse_armax for r in ok]),
        "mae_p_gbr": np.array([r.mae_gbr for r in ok]),
        "rmse_p_gbr": np.array([r.rmse_gbr for r in ok]),
    }
    agg: dict[str, SummaryStats] = {k: describe(v, TABLE5_PERCENTILES) for k, v in cols.items()}
    ttest = ttest_mae = None
    if len(ok) >= 20:
        ttest = trimmed_ttest(cols["rmse_p_armax"], cols["rmse_p_gbr"], fraction, paired)
        ttest_mae = trimmed_ttest(cols["mae_p_armax"], cols["mae_p_gbr"], fraction, paired)
    ra, rg = agg["rmse_p_armax"].mean, agg["rmse_p_gbr"].mean
    persistence = {
        "mae_mean": float(np.mean([r.mae_persistence for r in ok])),
        "rmse_mean": float(np.mean([r.rmse_persistence for r in ok])),
    }
    return ComparisonReport(
        day_results=tuple(results),
        aggregate=agg,
        ttest=ttest,
        ttest_mae=ttest_mae,
        improvement_pct=improvement_pct(ra, rg),
        persistence=persistence,
        trim=fraction,
    )


def improvement_pct(rmse_armax_mean: float, rmse_gbr_mean: float) -> float:
    """Relative mean-RMSE gain of GBR over ARMAX, in percent."""
    return 100.0 * (rmse_armax_mean - rmse_gbr_mean) / rmse_armax_mean


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else format_number(x)


def write_daily_errors(results: Sequence[DayResult], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date", "mae_armax", "rmse_armax", "mae_gbr", "rmse_gbr", "armax_converged"))
        for r in results:
            w.writerow(
                (str(r.date), _fmt(r.mae_armax), _fmt(r.rmse_armax), _fmt(r.mae_gbr), _fmt(r.rmse_gbr),
                 "true" if r.armax_converged else "false")
            )


def write_overlay(r: DayResult, path) -> None:
    """Within-day actual vs forecast prices."""
    d0 = r.date.astype("datetime64[h]")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("timestamp", "actual", "armax", "gbr"))
        for h in range(24):
            w.writerow(
                (format_timestamp(d0 + np.timedelta64(h, "h")), _fmt(r.actuals[h]),
                 _fmt(r.forecast_armax[h]), _fmt(r.forecast_gbr[h]))
            )
