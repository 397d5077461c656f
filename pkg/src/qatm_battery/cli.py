"""Command-line front end.

Subcommands: ``run`` a catalog scenario or JSON config, ``sweep`` a
parameter of one, ``list`` the catalog, and ``self-check``.  Exit codes:
0 success, 1 config error, 2 integration failure, 3 self-check failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from .dynamics import IntegrationError, default_backend
from .scenarios import (
    CATALOG,
    ConfigError,
    ScenarioConfig,
    load_config,
    run_scenario,
    self_check,
)

OUT_DIR_ENV = "QATM_BATTERY_OUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INTEGRATION = 2
EXIT_SELF_CHECK = 3


def _add_run_flags(sub: argparse.ArgumentParser):
    sub.add_argument("--out-dir", default=None,
                     help=f"output directory (default: ${OUT_DIR_ENV} or ./out)")
    sub.add_argument("--dt", type=float, default=None, help="integrator step override")
    sub.add_argument("--t-max", type=float, default=None, help="simulated time override")
    sub.add_argument("--stride", type=int, default=None, help="full-state storage stride")
    sub.add_argument("--threads", type=int, default=1, help="parallel sweep jobs")
    sub.add_argument("--log-base", choices=("2", "e"), default="2",
                     help="entropy logarithm base (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qatm-battery",
        description="Thermal-machine-mediated battery charging simulator",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="info-level logging")
    commands = parser.add_subparsers(dest="command", required=True)

    run_p = commands.add_parser("run", help="run a catalog scenario or a JSON config file")
    run_p.add_argument("scenario", help="catalog name (see 'list') or path to a config")
    _add_run_flags(run_p)

    sweep_p = commands.add_parser("sweep", help="run a scenario swept over one parameter")
    sweep_p.add_argument("scenario", help="catalog name or config path to use as base")
    sweep_p.add_argument("--parameter", required=True, choices=("g", "k", "f"))
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated sweep values, e.g. 0.1,0.3,0.9")
    _add_run_flags(sweep_p)

    commands.add_parser("list", help="list catalog scenarios")

    check_p = commands.add_parser("self-check", help="run the fast verification bundle")
    check_p.add_argument("--out-dir", default=None, help="also write the report as JSON here")
    return parser


def _resolve_config(name_or_path: str) -> ScenarioConfig:
    if name_or_path in CATALOG:
        return CATALOG[name_or_path]
    if Path(name_or_path).exists():
        return load_config(name_or_path)
    raise ConfigError(
        f"{name_or_path!r} is neither a catalog scenario ({', '.join(sorted(CATALOG))}) "
        "nor an existing config file"
    )


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if args.dt is not None:
        changes["dt"] = args.dt
    if args.t_max is not None:
        changes["t_max"] = args.t_max
    if args.stride is not None:
        changes["stride"] = args.stride
    return cfg.replace(**changes) if changes else cfg


def _out_dir(args) -> Path:
    return Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or "out")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.command == "list":
        for name, cfg in sorted(CATALOG.items()):
            sweep = f" [sweep {cfg.sweep.parameter} x{len(cfg.sweep.values)}]" if cfg.sweep else ""
            drives = ", ".join(f"{f:g}" for f in cfg.effective_f_variants)
            print(f"{name:6s} f in {{{drives}}}{sweep}  {cfg.description}")
        return EXIT_OK

    if args.command == "self-check":
        ok, report = self_check(verbose=True)
        print(f"backend: {report['backend']}")
        if args.out_dir:
            out = Path(args.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "self_check.json").write_text(json.dumps(report, indent=2) + "\n")
        return EXIT_OK if ok else EXIT_SELF_CHECK

    try:
        cfg = _resolve_config(args.scenario)
        cfg = _apply_overrides(cfg, args)
        if args.command == "sweep":
            values = tuple(float(v) for v in args.values.split(",") if v.strip())
            if not values:
                raise ConfigError("--values: expected at least one number")
            if any(not math.isfinite(v) for v in values):
                raise ConfigError("--values: entries must be finite")
            from .scenarios import SweepSpec

            changes = {"sweep": SweepSpec(args.parameter, values)}
            if args.parameter == "f":
                changes["f_variants"] = None
            cfg = cfg.replace(**changes)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = run_scenario(cfg, _out_dir(args), threads=args.threads,
                              log_base=2.0 if args.log_base == "2" else math.e)
    except IntegrationError as e:
        print(f"integration failure: {e}", file=sys.stderr)
        return EXIT_INTEGRATION
    print(f"backend: {default_backend()}")
    for f in result.files:
        print(f"wrote {f}")
    print(f"wrote {result.manifest_path}")
    return EXIT_OK


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
