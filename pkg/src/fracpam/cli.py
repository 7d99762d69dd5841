"""Command-line driver.

    fracpam renorm|converge|identity|chaos|regularity [--config PATH] [--out DIR]
            [--seeds N] [--threads K] [--override key=value ...]

Exit codes: 0 all checks passed, 1 numerical failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time

from .experiments import ConfigError, make_config, parse_overrides, read_config_file, run, write_report
from .solver import BlowUpError, PicardError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SUBCOMMANDS = {
    "renorm": "renorm",
    "converge": "convergence",
    "identity": "identity",
    "chaos": "chaos",
    "regularity": "regularity",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracpam", description="Renormalized fractional PAM: experiments and checks.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, experiment in SUBCOMMANDS.items():
        s = sub.add_parser(name, help=f"run the {experiment} experiment")
        s.add_argument("--config", metavar="PATH", help="INI file with an [experiment] section")
        s.add_argument("--out", metavar="DIR", help="output directory (default: results/<command>)")
        s.add_argument("--seeds", metavar="N", type=int, help="number of seeds (n_samples)")
        s.add_argument("--threads", metavar="K", type=int, default=1, help="worker processes")
        s.add_argument("--override", metavar="KEY=VALUE", action="append", default=[], help="override a config key")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    experiment = SUBCOMMANDS[args.command]
    try:
        settings = read_config_file(args.config) if args.config else {}
        settings.update(parse_overrides(args.override))
        if args.seeds is not None:
            settings["n_samples"] = str(args.seeds)
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
        settings["workers"] = str(args.threads)
        settings["output_dir"] = args.out or settings.get("output_dir", f"results/{args.command}")
        cfg = make_config(experiment, settings)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    started = time.time()
    try:
        report = run(cfg)
    except (BlowUpError, PicardError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = write_report(report, cfg, started=started)
    for line in report.lines():
        print(line)
    print(f"{'PASS' if report.passed else 'FAIL'} {experiment} -> {out}")
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
