"""Seeded synthetic datasets shaped like the competition price track.

Loads follow daily and weekly sinusoids plus smooth AR(1) noise; the zonal
load is a correlated mix of the total load. Log-prices are simulated from a
ground-truth ARMAX model driven by the standardized loads, plus a fixed
intraday shape (second daily harmonic) and an extra day-over-day persistent
component at night hours (0-6).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from . import armax
from .dataset import Dataset, write_csv
from .rng import SplitMix64, derive_seed

MIN_DAYS = 35
NIGHT_HOURS = tuple(range(7))
LOAD_NOISE_AR = 0.95


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class LoadSeasonality:
    t_base: float = 18000.0
    t_scale: float = 3500.0  # standardization scale used for the price model
    t_daily_amp: float = 2500.0
    t_weekly_amp: float = 1200.0
    t_noise: float = 1500.0  # stationary sd of the hourly AR(1) noise
    z_base: float = 6100.0
    z_scale: float = 1300.0
    z_noise: float = 1.0  # weight of the independent part of the zonal mix


def default_truth() -> armax.ArmaxModel:
    return armax.ArmaxModel.from_coefficients(
        phi=(0.5, -0.2), theta=(0.3,), eta=(0.4, -0.1), intercept=2.66, sigma2=0.01
    )


@dataclass(frozen=True)
class SynthConfig:
    n_days: int = 400
    seed: int = 7
    price_truth: armax.ArmaxModel = field(default_factory=default_truth)
    load_seasonality: LoadSeasonality = field(default_factory=LoadSeasonality)
    zonal_corr: float = 0.97
    night_persistence: float = 0.9
    night_noise: float = 0.15
    hourly_profile_amp: float = 0.2
    start: str = "2011-01-01"

    def __post_init__(self):
        if self.n_days < MIN_DAYS:
            raise SynthError(f"n_days must be at least {MIN_DAYS}, got {self.n_days}")
        if not 0.0 < self.zonal_corr < 1.0:
            raise SynthError("zonal_corr must be in (0, 1)")
        if not 0.0 <= self.night_persistence < 1.0:
            raise SynthError("night_persistence must be in [0, 1)")
        if self.price_truth.spec.b != 2:
            raise SynthError("price_truth must take exactly two exogenous inputs (t, z)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["price_truth"] = self.price_truth.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def price_exog(total_load, zonal_load, seasonality: LoadSeasonality = LoadSeasonality()) -> np.ndarray:
    """Standardized (t, z) columns the ground-truth price model is driven by."""
    s = seasonality
    t = (np.asarray(total_load) - s.t_base) / s.t_scale
    z = (np.asarray(zonal_load) - s.z_base) / s.z_scale
    return np.column_stack([t, z])


def _ar1(innov: np.ndarray, phi: float, sd: float) -> np.ndarray:
    """Stationary AR(1) with marginal sd ``sd`` from standard-normal innovations."""
    e = innov * sd * np.sqrt(1.0 - phi**2)
    e[0] = innov[0] * sd
    return lfilter([1.0], [1.0, -phi], e)


def generate(cfg: SynthConfig = SynthConfig()) -> Dataset:
    s = cfg.load_seasonality
    n = cfg.n_days * 24
    start = np.datetime64(cfg.start, "h")
    ts = start + np.arange(n).astype("timedelta64[h]")
    hour_of_day = np.arange(n) % 24
    hours_since_monday = (((start.astype("datetime64[D]").astype(np.int64) + 3) % 7) * 24 + np.arange(n)) % 168

    t = (
        s.t_base
        + s.t_daily_amp * np.sin(2 * np.pi * (hour_of_day - 9) / 24)
        + s.t_weekly_amp * np.sin(2 * np.pi * hours_since_monday / 168)
        + _ar1(SplitMix64(derive_seed(cfg.seed, 1)).normal(n), LOAD_NOISE_AR, s.t_noise)
    )
    t_std = (t - t.mean()) / t.std()
    w = SplitMix64(derive_seed(cfg.seed, 2)).normal(n) * s.z_noise
    rho = cfg.zonal_corr
    z = s.z_base + s.z_scale * (rho * t_std + np.sqrt(1.0 - rho**2) * w)
    # whole units, as in the competition files
    t = np.round(np.maximum(t, 0.05 * s.t_base))
    z = np.round(np.maximum(z, 0.05 * s.z_base))

    x = armax.simulate(cfg.price_truth, price_exog(t, z, s), n, seed=derive_seed(cfg.seed, 3))

    if cfg.night_noise > 0:
        days = cfg.n_days
        innov = SplitMix64(derive_seed(cfg.seed, 4)).normal(days * len(NIGHT_HOURS)).reshape(len(NIGHT_HOURS), days)
        night = np.zeros((days, 24))
        for k, h in enumerate(NIGHT_HOURS):
            night[:, h] = _ar1(innov[k], cfg.night_persistence, cfg.night_noise)
        x = x + night.reshape(-1)

    x = x + cfg.hourly_profile_amp * hourly_profile(hour_of_day)
    return Dataset(ts, np.exp(x), t, z)


def hourly_profile(hour) -> np.ndarray:
    """Unit-amplitude double-peak shape (08:00 and 20:00), a pure second daily harmonic."""
    return np.cos(4 * np.pi * (np.asarray(hour) - 8) / 24)


def truth_exog(ds: Dataset, seasonality: LoadSeasonality = LoadSeasonality()) -> np.ndarray:
    """Regressors that make an ARMAX fit on generated data correctly specified.

    Standardized (t, z) followed by the cosine and sine second daily harmonics,
    which span the intraday profile and its AR-lagged copies.
    """
    hour = (ds.timestamps - ds.timestamps.astype("datetime64[D]")).astype(np.int64)
    angle = 4 * np.pi * hour / 24
    return np.column_stack([price_exog(ds.total_load, ds.zonal_load, seasonality), np.cos(angle), np.sin(angle)])


def write(cfg: SynthConfig, csv_path, json_path=None) -> Dataset:
    ds = generate(cfg)
    write_csv(ds, csv_path)
    if json_path is None:
        json_path = Path(csv_path).with_suffix(".json")
    Path(json_path).write_text(cfg.to_json() + "\n", encoding="utf-8")
    return ds
