"""Command-line front end.

Exit codes: 0 success, 1 domain or validation failure, 2 I/O failure.
``TDOA_LOG`` sets log verbosity (DEBUG, INFO, WARNING, ...).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

from . import harness
from . import io as nio
from .config import ScenarioConfig, load_config, problems
from .errors import ConfigError, InsufficientData, PositioningError, UnknownParameter

log = logging.getLogger("nrpos")

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2


def _load(args) -> ScenarioConfig:
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config = dataclasses.replace(config, seed=args.seed)
    return config


def cmd_validate(args) -> int:
    config = _load(args)
    errs = problems(config)
    for e in errs:
        print(f"FAIL {e}")
    if not errs:
        print("OK scenario is valid")
    return EXIT_DOMAIN if errs else EXIT_OK


def cmd_calibrate(args) -> int:
    config = _load(args)
    cal = harness.run_calibration_campaign(config)
    path = nio.write_calibration(Path(args.out) / "calibration.csv", cal)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_locate(args) -> int:
    config = _load(args)
    if not args.calibration:
        raise ConfigError("locate needs --calibration PATH")
    cal = nio.read_calibration(args.calibration)
    if cal.n_gnbs != config.deployment.n_gnbs:
        raise InsufficientData(f"calibration file has {cal.n_gnbs} gNBs, scenario has {config.deployment.n_gnbs}")
    report = harness.run_positioning_campaign(config, cal)
    out = Path(args.out)
    o = config.output
    nio.write_estimates(out / "estimates.csv", report)
    nio.write_hyperbolas(out / "hyperbolas.csv", report, config.deployment, o.hyperbola_t_max, o.hyperbola_points)
    nio.write_rstd_records(out / "rstd_records.csv", report)
    if args.svg:
        nio.write_svg(out / "positioning.svg", report, config.deployment, o.hyperbola_t_max, o.hyperbola_points)
    print(f"RMSE {report.rmse_m} m over {len(report.positions) - len(report.flagged)} fixes; wrote {out}")
    return EXIT_OK


def parse_sweep(spec: str) -> tuple[str, float, float, int]:
    try:
        param, rng = spec.split("=", 1)
        start, stop, n = rng.split(":")
        start_f, stop_f, n_i = float(start), float(stop), int(n)
    except ValueError:
        raise ConfigError(f"--sweep must look like PARAM=START:STOP:N, got {spec!r}") from None
    if param not in harness.SWEEP_PARAMETERS:
        raise UnknownParameter(f"unknown sweep parameter {param!r}; choose from {harness.SWEEP_PARAMETERS}")
    if n_i < 1:
        raise ConfigError("sweep needs N >= 1 points")
    return param, start_f, stop_f, n_i


def cmd_sweep(args) -> int:
    config = _load(args)
    if not args.sweep:
        raise ConfigError("sweep needs --sweep PARAM=START:STOP:N")
    param, start, stop, n = parse_sweep(args.sweep)
    rows = harness.run_sweep(config, param, harness.sweep_values(param, start, stop, n))
    path = nio.write_sweep(Path(args.out) / "sweep.csv", rows)
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _load(args)
    report = harness.run_session(config)
    out = Path(args.out)
    o = config.output
    nio.write_toa_records(out / "toa_records.csv", report.toa_records())
    nio.write_rstd_records(out / "rstd_records.csv", report)
    nio.write_calibration(out / "calibration.csv", report.calibration)
    nio.write_estimates(out / "estimates.csv", report)
    nio.write_histogram(out / "histogram.csv", report, o.histogram_bin_s)
    nio.write_hyperbolas(out / "hyperbolas.csv", report, config.deployment, o.hyperbola_t_max, o.hyperbola_points)
    if args.svg:
        nio.write_svg(out / "positioning.svg", report, config.deployment, o.hyperbola_t_max, o.hyperbola_points)
    print(f"delta_hat {report.calibration.delta_hat_s}; RMSE {report.rmse_m} m; wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario YAML (default: shipped default scenario)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, help="override the scenario seed")

    p = argparse.ArgumentParser(prog="nrpos", description="5G NR PRS TDOA positioning simulator")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check scenario invariants").set_defaults(func=cmd_validate)
    sub.add_parser("calibrate", parents=[common], help="estimate inter-gNB offsets").set_defaults(func=cmd_calibrate)
    loc = sub.add_parser("locate", parents=[common], help="position the test UEs")
    loc.add_argument("--calibration", help="calibration.csv from the calibrate command")
    loc.add_argument("--svg", action="store_true", help="also write positioning.svg")
    loc.set_defaults(func=cmd_locate)
    sw = sub.add_parser("sweep", parents=[common], help="multipath / SNR / interpolation study")
    sw.add_argument("--sweep", help="PARAM=START:STOP:N with PARAM in excess_delay, snr_db, oversample_factor")
    sw.set_defaults(func=cmd_sweep)
    sim = sub.add_parser("simulate", parents=[common], help="full session, all CSV artifacts")
    sim.add_argument("--svg", action="store_true", help="also write positioning.svg")
    sim.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("TDOA_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PositioningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
