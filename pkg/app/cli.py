"""
命令行入口。
从项目根目录运行: python -m app.cli <subcommand> [--config FILE] [--set key=value ...]

子命令：simulate / estimate / forecast / montecarlo / diagnose / compare。
退出码：0 成功，1 未预期的异常，2 配置错误，3 数据错误，4 数值失败。
"""
from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from pathlib import Path
from typing import Any, Sequence

# 保证项目根在 path 中（以 core/labs 可被 import）
ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

import pandas as pd

from core import orchestrator
from core.context import PanelData
from core.errors import ConfigError, SdfmError
from core.schemas import StaticParams, TvParams, params_from_dict
from labs.montecarlo import McDesign
from labs.simulator import build_dgp

from app.config import ExperimentConfig, load_config, load_env
from app.provenance import build_provenance
from app.result_store import load_fit, save_fit, write_csv, write_json

logger = logging.getLogger(__name__)


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_").lower() or "fit"


def _load_data(config: ExperimentConfig) -> PanelData:
    return PanelData.from_csv(config.data_path(), standardize=bool(config["data"]["standardize"]))


def _dgp_params(config: ExperimentConfig) -> StaticParams | TvParams:
    section = config["dgp"]
    if section.get("params"):
        return params_from_dict(section["params"])
    return build_dgp(section["preset"], config.seed)


# ---------------------------------------------------------------------------
# 子命令
# ---------------------------------------------------------------------------
def cmd_simulate(config: ExperimentConfig) -> int:
    sim = config["simulation"]
    report = orchestrator.run_simulate(_dgp_params(config), int(sim["T"]), config.seed, int(sim["burn_in"]))
    prov = build_provenance(config.values, "simulate")
    out = config.output_dir
    write_csv(out / "simulated.csv", report.data.to_frame(), prov)
    factors = pd.DataFrame(report.factors, columns=[f"f{k + 1}" for k in range(report.factors.shape[1])])
    write_csv(out / "simulated_factors.csv", factors, prov)
    return 0


def cmd_estimate(config: ExperimentConfig, output: str | None = None) -> int:
    data = _load_data(config)
    report = orchestrator.run_estimate(data, config.estimation_config(), config["model"].get("label"))
    path = Path(output) if output else config.output_dir / f"fit_{_slug(report.label)}.json"
    save_fit(path, report.label, report.fit, build_provenance(config.values, "estimate"))
    print(f"{report.label}: loglik={report.fit.total_loglik:.4f} aic={report.aic:.4f} bic={report.bic:.4f}")
    return 0


def cmd_forecast(config: ExperimentConfig) -> int:
    section = config["forecast"]
    data = _load_data(config)
    fixed = load_fit(Path(section["fit"]))[1] if section.get("fit") else None
    report = orchestrator.run_forecast(
        data, config.estimation_config(), int(section["window"]), int(section["refit_every"]),
        bool(section["cold_start"]), config.threads, fixed,
    )
    prov = build_provenance(config.values, "forecast")
    out = config.output_dir
    write_csv(out / "forecasts.csv", report.result.to_frame(), prov)
    write_json(out / "forecast_summary.json", {
        "forecasts": report.result.count,
        "window": report.result.window,
        "mse": report.mse,
        "white_noise_mse": report.white_noise_mse,
        "skipped": report.result.skipped,
        "standardized": data.standardized,
        "provenance": prov,
    })
    print(f"{report.result.count} forecasts, mse={report.mse:.6f} (white noise {report.white_noise_mse:.6f})")
    return 0


def cmd_montecarlo(config: ExperimentConfig) -> int:
    section = dict(config["montecarlo"])
    dgp = config["dgp"].get("params") or config["dgp"]["preset"]
    if isinstance(dgp, dict):
        section["lambda_law"] = "fixed"
    design = McDesign.from_dict({"dgp": dgp, **section}, seed=config.seed)
    report = orchestrator.run_montecarlo(design, config.estimation_config(), config.threads)
    result = report.result
    prov = build_provenance(config.values, "montecarlo")
    out = config.output_dir
    write_csv(out / "mc_estimates.csv", result.estimates, prov)
    write_csv(out / "mc_frobenius.csv", result.distances, prov)
    write_csv(out / "mc_kde.csv", result.kde, prov)
    trend = result.rmse_trend()
    write_json(out / "mc_summary.json", {
        **result.to_summary_dict(),
        "rmse_trend": {"inversions": trend.inversions, "pairs": trend.pairs, "ok": trend.ok},
        "provenance": prov,
    })
    return 0


def cmd_diagnose(config: ExperimentConfig) -> int:
    section = config["diagnose"]
    if section.get("fit"):
        params = load_fit(Path(section["fit"]))[1].params
        if not isinstance(params, StaticParams):
            raise ConfigError("diagnose works on static fits")
    else:
        params = _dgp_params(config)
        if not isinstance(params, StaticParams):
            raise ConfigError("diagnose needs a static DGP preset or fit")
    if config["data"]["path"]:
        data = _load_data(config)
    else:
        data = orchestrator.run_simulate(params, int(config["simulation"]["T"]), config.seed,
                                         int(config["simulation"]["burn_in"])).data
    shift = None
    if section.get("order_shift"):
        shift = (config.estimation_config(), section["order_shift"])
    report = orchestrator.run_diagnose(
        data, params, int(section["n_transforms"]), int(section["n_permutations"]),
        config.seed, config.threads, shift,
    )
    prov = build_provenance(config.values, "diagnose")
    out = config.output_dir
    write_csv(out / "diagnostics.csv", report.rows, prov)
    failed = report.failed_checks
    write_json(out / "diagnose_summary.json", {
        "checks": len(report.rows),
        "unexpected_failures": len(failed),
        "order_shift": report.order_shift,
        "provenance": prov,
    })
    print(f"{len(report.rows)} checks, {len(failed)} unexpected failures")
    return 0


def cmd_compare(config: ExperimentConfig, nest: Sequence[str] = ()) -> int:
    section = config["compare"]
    if not section["fits"]:
        raise ConfigError("compare needs at least one fit file")
    fits: dict[str, Any] = {}
    for path in section["fits"]:
        label, fit = load_fit(Path(path))
        if label in fits:
            raise ConfigError(f"duplicate fit label {label!r}")
        fits[label] = fit
    nestings = [tuple(pair) for pair in section["nestings"]]
    for item in nest:
        if ":" not in item:
            raise ConfigError(f"--nest expects RESTRICTED:FULL, got {item!r}")
        nestings.append(tuple(item.split(":", 1)))
    report = orchestrator.run_compare(fits, nestings)
    prov = build_provenance(config.values, "compare")
    out = config.output_dir
    write_csv(out / "comparison.csv", report.table, prov)
    write_csv(out / "lr_tests.csv", report.lr, prov)
    print(report.table.to_string(index=False))
    return 0


# ---------------------------------------------------------------------------
# 参数解析
# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--output-dir")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key, e.g. --set estimation.restarts=5")

    parser = argparse.ArgumentParser(prog="sdfm", description="Score-driven dynamic factor models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate one path from a DGP")
    p.add_argument("--T", type=int, dest="T")
    p.add_argument("--preset")

    p = sub.add_parser("estimate", parents=[common], help="fit a model by maximum likelihood")
    p.add_argument("--data")
    p.add_argument("--r", type=int)
    p.add_argument("--restriction")
    p.add_argument("--label")
    p.add_argument("--output", help="fit record path (default: <output-dir>/fit_<label>.json)")

    p = sub.add_parser("forecast", parents=[common], help="rolling one-step-ahead forecasts")
    p.add_argument("--data")
    p.add_argument("--window", type=int)
    p.add_argument("--refit-every", type=int)
    p.add_argument("--cold-start", action="store_true", default=None)
    p.add_argument("--fit", help="forecast with a saved fit instead of re-estimating")

    p = sub.add_parser("montecarlo", parents=[common], help="Monte Carlo study")
    p.add_argument("--replications", type=int)
    p.add_argument("--preset")

    p = sub.add_parser("diagnose", parents=[common], help="identification checks")
    p.add_argument("--data")
    p.add_argument("--fit")

    p = sub.add_parser("compare", parents=[common], help="information criteria and LR tests")
    p.add_argument("fits", nargs="*", help="fit record files")
    p.add_argument("--nest", action="append", default=[], metavar="RESTRICTED:FULL")
    return parser


_FLAG_KEYS = {
    "seed": "seed",
    "threads": "threads",
    "output_dir": "output_dir",
    "T": "simulation.T",
    "preset": "dgp.preset",
    "data": "data.path",
    "r": "model.r",
    "restriction": "restriction.kind",
    "label": "model.label",
    "window": "forecast.window",
    "refit_every": "forecast.refit_every",
    "cold_start": "forecast.cold_start",
    "replications": "montecarlo.replications",
}


def _flags(args: argparse.Namespace) -> dict[str, Any]:
    flags = {key: getattr(args, name, None) for name, key in _FLAG_KEYS.items()}
    if getattr(args, "fit", None):
        flags["forecast.fit" if args.command == "forecast" else "diagnose.fit"] = args.fit
    if getattr(args, "fits", None):
        flags["compare.fits"] = args.fits
    return flags


def _configure_logging(level: str | None) -> None:
    load_env()
    name = (level or os.getenv("SDFM_LOG_LEVEL") or "INFO").strip().upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level)
    try:
        config = load_config(args.config, args.set, _flags(args))
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "estimate":
            return cmd_estimate(config, args.output)
        if args.command == "forecast":
            return cmd_forecast(config)
        if args.command == "montecarlo":
            return cmd_montecarlo(config)
        if args.command == "diagnose":
            return cmd_diagnose(config)
        return cmd_compare(config, args.nest)
    except SdfmError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("%s failed unexpectedly", args.command)
        print(f"error: unexpected {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
