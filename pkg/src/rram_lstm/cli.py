"""Command-line entry point: ``rram-lstm run`` and ``rram-lstm compare``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, load_config
from .data import DataError
from .experiment import comparison_report, load_report, run_experiment, write_comparison


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rram-lstm", description="LSTM training on a simulated passive RRAM crossbar")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train one variant and write its report")
    run.add_argument("--config", help="flat key = value config file")
    run.add_argument("--variant", choices=["digital", "crossbar_ideal", "crossbar_noisy"])
    run.add_argument("--seed", type=int)
    run.add_argument("--epochs", type=int)
    run.add_argument("--out", help="output directory")
    run.add_argument("--replicas", type=int)
    run.add_argument("--jobs", type=int, default=1, help="worker processes for replicas")

    cmp_ = sub.add_parser("compare", help="energy/area table from run reports")
    cmp_.add_argument("--inputs", nargs="*", default=[], help="report.json files")
    cmp_.add_argument("--out", required=True)

    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _fail(kind: str, message: str, details=None, code: int = 1) -> int:
    err = {"error": kind, "message": message}
    if details:
        err["details"] = details
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            cfg = load_config(
                args.config,
                variant=args.variant,
                seed=args.seed,
                replicas=args.replicas,
                output_dir=args.out,
                **{"training.epochs": args.epochs},
            )
            report = run_experiment(cfg, jobs=args.jobs)
            print(report["files"]["report_json"])
        else:
            reports = [load_report(p) for p in args.inputs]
            paths = write_comparison(comparison_report(reports), args.out)
            print(paths["csv"])
    except ConfigError as exc:
        return _fail("config", "invalid configuration", exc.problems, code=2)
    except DataError as exc:
        return _fail("data", str(exc))
    except (OSError, ValueError, KeyError) as exc:
        return _fail(type(exc).__name__, str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
