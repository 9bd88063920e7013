"""Command-line interface: ``pricecast {describe,acf,backtest,synth,fit}``.

Parameters come from built-in defaults, then an optional INI config file
(``--config``), then the ``PRICECAST_SEED`` environment variable for seeds,
then command-line flags. The effective configuration is written next to the
outputs as ``config.json``.

Exit codes: 0 success, 2 usage/config/data error, 1 internal error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__, armax, gbrt, stats, synth
from . import evaluation as ev
from .armax import ArmaxError
from .dataset import DatasetError, load_csv, slice as ds_slice
from .features import FeatureConfig, FeatureError, build_design
from .gbrt import GbrtError
from .stats import StatsError
from .synth import SynthError

log = logging.getLogger("pricecast")

SEED_ENV = "PRICECAST_SEED"
USER_ERRORS = (DatasetError, FeatureError, ArmaxError, GbrtError, StatsError, SynthError, ev.BacktestError)


class ConfigError(ValueError):
    pass


def _int_or_none(text: str) -> Optional[int]:
    return None if str(text).lower() in ("none", "") else int(text)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _csv_list(text) -> tuple[str, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(text)
    return tuple(s.strip() for s in str(text).split(",") if s.strip())


# name -> (type, default, help); shared so that config-file keys and flags agree
DATA_OPTS = {
    "data": (str, None, "dataset CSV"),
    "gefcom": (_bool, False, "input uses the raw GEFCOM price-track header"),
    "output_dir": (str, "out", "directory for output files"),
}
FEATURE_OPTS = {
    "neighbor_shifts": (_bool, False, "add +/-1h shifted difference features"),
    "price_lag": (_bool, False, "add the y_M24 log-price lag feature"),
    "dow_anchor": (int, 0, "weekday (Monday=0) mapped to dow 0"),
}
ARMAX_OPTS = {
    "p": (int, 2, "ARMAX AR order"),
    "q": (int, 1, "ARMAX MA order"),
    "armax_exog": (_csv_list, ",".join(ev.ARMAX_EXOG), "comma-separated ARMAX exogenous columns"),
    "no_intercept": (_bool, False, "fit ARMAX without an intercept"),
}
GBRT_OPTS = {
    "n_trees": (int, 100, "boosting stages"),
    "max_depth": (_int_or_none, 3, "tree depth (none = unlimited)"),
    "learning_rate": (float, 0.1, "shrinkage"),
    "min_leaf": (int, 5, "minimum samples per leaf"),
    "seed": (int, 0, "seed (reserved: fitting is deterministic)"),
}
COMMANDS = {
    "describe": {**DATA_OPTS, "bins": (int, 50, "histogram bins")},
    "acf": {
        **DATA_OPTS,
        **FEATURE_OPTS,
        "column": (str, "log_price", "feature column, price or log_price"),
        "max_lag": (int, 48, "largest hourly lag"),
        "hour": (_int_or_none, None, "hour of day for the day-lag ACF of price"),
        "max_day_lag": (int, 14, "largest day lag when --hour is given"),
    },
    "backtest": {
        **DATA_OPTS,
        **FEATURE_OPTS,
        **ARMAX_OPTS,
        **GBRT_OPTS,
        "train_window_days": (int, 30, "rolling training window in days"),
        "test_start": (str, None, "first test day YYYY-MM-DD"),
        "test_end": (str, None, "last test day YYYY-MM-DD (inclusive)"),
        "trim": (float, 0.05, "fraction trimmed from each end before the t-test"),
        "paired_ttest": (_bool, False, "trim day-wise differences and run a paired t-test"),
        "jobs": (int, os.cpu_count() or 1, "worker processes"),
        "emit_days": (_csv_list, "", "comma-separated days to write forecast overlays for"),
    },
    "synth": {
        "output_dir": (str, "out", "directory for output files"),
        "n_days": (int, 400, "number of days"),
        "seed": (int, 7, "generator seed"),
        "start": (str, "2011-01-01", "first day"),
        "zonal_corr": (float, 0.97, "target corr(z, t)"),
        "night_persistence": (float, 0.9, "day-over-day AR weight of the night component"),
        "night_noise": (float, 0.15, "innovation sd of the night component (log scale)"),
        "hourly_profile_amp": (float, 0.2, "amplitude of the intraday log-price shape"),
    },
    "fit": {
        **DATA_OPTS,
        **FEATURE_OPTS,
        **ARMAX_OPTS,
        **GBRT_OPTS,
        "model": (str, "gbr", "armax or gbr"),
        "start": (str, None, "first training hour YYYY-MM-DDTHH:MM"),
        "end": (str, None, "last training hour YYYY-MM-DDTHH:MM"),
    },
}
HELP = {
    "describe": "summary statistics, correlation matrix and histograms",
    "acf": "autocorrelation of a feature column or of hourly prices",
    "backtest": "rolling-window ARMAX vs GBR backtest",
    "synth": "generate a synthetic dataset",
    "fit": "fit one model on a range and serialize it",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pricecast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="INI config file")
        for key, (typ, default, helptext) in opts.items():
            flag = "--" + key.replace("_", "-")
            if typ is _bool:
                p.add_argument(flag, dest=key, nargs="?", const=True, type=_bool, default=None,
                               help=f"{helptext} (default {default})")
            else:
                p.add_argument(flag, dest=key, type=typ, default=None, help=f"{helptext} (default {default})")
    return parser


def resolve(command: str, args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults < config file < PRICECAST_SEED < flags."""
    opts = COMMANDS[command]
    cfg = {k: (None if d is None else t(d)) for k, (t, d, _) in opts.items()}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cp = configparser.ConfigParser()
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        items: dict[str, str] = {}
        for section in ("pricecast", command):
            if cp.has_section(section):
                items.update(cp.items(section))
        for key, raw in items.items():
            key = key.replace("-", "_")
            if key not in opts:
                raise ConfigError(f"unknown key {key!r} in {path} for '{command}'")
            try:
                cfg[key] = opts[key][0](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key} in {path}: {exc}") from None
    if "seed" in opts and os.environ.get(SEED_ENV):
        try:
            cfg["seed"] = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    for key in opts:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    return cfg


def _load(cfg):
    if not cfg.get("data"):
        raise ConfigError("--data is required")
    path = Path(cfg["data"])
    if not path.is_file():
        raise ConfigError(f"data file not found: {path}")
    return load_csv(path, gefcom=cfg["gefcom"])


def _outdir(cfg) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(out: Path, command: str, cfg: dict) -> None:
    doc = {"command": command, **{k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(cfg.items())}}
    (out / "config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _feature_config(cfg) -> FeatureConfig:
    return FeatureConfig(cfg["neighbor_shifts"], cfg["price_lag"], cfg["dow_anchor"])


def _gbrt_params(cfg) -> gbrt.GbrtParams:
    return gbrt.GbrtParams(cfg["n_trees"], cfg["max_depth"], cfg["learning_rate"], cfg["min_leaf"], cfg["seed"])


def _armax_spec(cfg) -> armax.ArmaxSpec:
    return armax.ArmaxSpec(cfg["p"], cfg["q"], len(cfg["armax_exog"]), not cfg["no_intercept"])


def cmd_describe(cfg) -> int:
    ds = _load(cfg)
    out = _outdir(cfg)
    priced = ds.has_price
    cols = {
        "price": ds.price[priced],
        "total_load": ds.total_load[priced],
        "zonal_load": ds.zonal_load[priced],
    }
    stats.write_summary_csv({k: stats.describe(v) for k, v in cols.items()}, out / "summary.csv")
    names, mat = stats.correlation_matrix(
        {"price": cols["price"], "zonal_load": cols["zonal_load"], "total_load": cols["total_load"]}
    )
    stats.write_matrix_csv(names, mat, out / "correlation.csv")
    stats.write_histogram_csv({"price": stats.histogram(cols["price"], cfg["bins"])}, out / "hist_price.csv", False)
    stats.write_histogram_csv(
        {
            "total_load": stats.histogram(ds.total_load, cfg["bins"]),
            "zonal_load": stats.histogram(ds.zonal_load, cfg["bins"]),
        },
        out / "hist_loads.csv",
        True,
    )
    _echo_config(out, "describe", cfg)
    log.info("wrote summary, correlation and histograms to %s", out)
    return 0


def cmd_acf(cfg) -> int:
    ds = _load(cfg)
    out = _outdir(cfg)
    if cfg["hour"] is not None:
        res = stats.hourly_acf(ds, cfg["hour"], cfg["max_day_lag"])
        target = out / f"acf_hour{cfg['hour']:02d}.csv"
    else:
        fm = build_design(ds, _feature_config(cfg))
        column = cfg["column"]
        if column == "price":
            series = ds.price[ds.has_price]
        elif column == "log_price":
            series = fm.target[~np.isnan(fm.target)]
        elif column in fm.columns:
            series = fm.column(column)
        else:
            valid = ", ".join(("price", "log_price") + fm.columns)
            raise ConfigError(f"unknown column {column!r}; valid columns: {valid}")
        res = stats.acf(series, cfg["max_lag"])
        target = out / f"acf_{column}.csv"
    stats.write_acf_csv(res, target)
    _echo_config(out, "acf", cfg)
    log.info("wrote %s", target)
    return 0


def backtest_config(cfg) -> ev.BacktestConfig:
    return ev.BacktestConfig(
        train_window_days=cfg["train_window_days"],
        test_start=cfg["test_start"],
        test_end=cfg["test_end"],
        armax_spec=_armax_spec(cfg),
        armax_exog=tuple(cfg["armax_exog"]),
        gbrt_params=_gbrt_params(cfg),
        feature_config=_feature_config(cfg),
    )


def cmd_backtest(cfg) -> int:
    bt = backtest_config(cfg)
    ds = _load(cfg)
    days = ev.resolve_test_days(ds, bt)
    emit = [np.datetime64(d, "D") for d in cfg["emit_days"]]
    for d in emit:
        if d not in days:
            raise ConfigError(f"--emit-days {d} is outside the test range {days[0]} .. {days[-1]}")
    out = _outdir(cfg)
    log.info("backtesting %d days with %d job(s)", len(days), cfg["jobs"])
    results = ev.run_backtest(ds, bt, jobs=cfg["jobs"])
    report = ev.aggregate(results, fraction=cfg["trim"], paired=cfg["paired_ttest"])
    ev.write_daily_errors(results, out / "daily_errors.csv")
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    gbrt.write_importances(results[-1].gbr_importances, out / "importances.csv")
    by_day = {r.date: r for r in results}
    for d in emit:
        ev.write_overlay(by_day[d], out / f"forecast_{d}.csv")
    _echo_config(out, "backtest", cfg)
    log.info(
        "%d days, %d converged; mean RMSE armax %.4f gbr %.4f",
        report.n_days, report.n_converged,
        report.aggregate["rmse_p_armax"].mean, report.aggregate["rmse_p_gbr"].mean,
    )
    return 0


def synth_config(cfg) -> synth.SynthConfig:
    return synth.SynthConfig(
        n_days=cfg["n_days"],
        seed=cfg["seed"],
        zonal_corr=cfg["zonal_corr"],
        night_persistence=cfg["night_persistence"],
        night_noise=cfg["night_noise"],
        hourly_profile_amp=cfg["hourly_profile_amp"],
        start=cfg["start"],
    )


def cmd_synth(cfg) -> int:
    sc = synth_config(cfg)
    out = _outdir(cfg)
    ds = synth.write(sc, out / "synthetic.csv", out / "synthetic.json")
    _echo_config(out, "synth", cfg)
    log.info("wrote %d rows to %s", len(ds), out / "synthetic.csv")
    return 0


def cmd_fit(cfg) -> int:
    ds = _load(cfg)
    kind = cfg["model"]
    if kind not in ("armax", "gbr"):
        raise ConfigError(f"--model must be armax or gbr, got {kind!r}")
    start = cfg["start"] or ds.start
    end = cfg["end"] or ds.timestamps[ds.has_price][-1]
    fm = build_design(ds_slice(ds, start, end), _feature_config(cfg))
    fm = fm.rows(~np.isnan(fm.target))
    out = _outdir(cfg)
    if kind == "gbr":
        model = gbrt.fit(fm, fm.target, _gbrt_params(cfg))
        (out / "model_gbr.json").write_text(model.to_json() + "\n", encoding="utf-8")
        gbrt.write_importances(gbrt.feature_importances(model), out / "importances.csv")
    else:
        exog = fm.select(cfg["armax_exog"]) if cfg["armax_exog"] else None
        model = armax.fit(fm.target, exog, _armax_spec(cfg))
        doc = {**model.to_dict(), "exog_columns": list(cfg["armax_exog"])}
        (out / "model_armax.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        if not model.converged:
            log.warning("ARMAX regression did not converge (condition number %.3g)", model.condition_number)
    _echo_config(out, "fit", cfg)
    return 0


HANDLERS = {
    "describe": cmd_describe,
    "acf": cmd_acf,
    "backtest": cmd_backtest,
    "synth": cmd_synth,
    "fit": cmd_fit,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve(args.command, args)
        return HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"pricecast: error: {exc}", file=sys.stderr)
        return 2
    except USER_ERRORS as exc:
        print(f"pricecast: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"pricecast: internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
