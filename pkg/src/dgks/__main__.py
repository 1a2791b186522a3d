"""
Command-line entry point::

    python -m dgks CONFIG [--mode {global,dg,compare}] [--workers N] [--seed S]
                          [--output-dir DIR] [-v] [--sweep {jk,buffer,alpha} --values "4 6 8"]

The worker count defaults to the ``DGKS_WORKERS`` environment variable, then
to the configuration file, then to 1; ``--workers`` wins over all of them.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ConfigError, load_config
from .parallel import WORKERS_ENV
from .runner import parse_sweep_values, run, sweep


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="python -m dgks",
        description="Planewave and adaptive-local-basis DG Kohn-Sham solvers on a periodic box.",
        epilog=f"Environment: {WORKERS_ENV} sets the worker count when --workers is absent.")
    p.add_argument("config", help="YAML run configuration")
    p.add_argument("--mode", choices=("global", "dg", "compare"), help="override the configured mode")
    p.add_argument("--workers", type=int, help="element-parallel worker threads")
    p.add_argument("--seed", type=int, help="override the random seed")
    p.add_argument("--output-dir", help="directory for result files")
    p.add_argument("--sweep", choices=("jk", "buffer", "alpha"), help="run a parameter sweep in compare mode")
    p.add_argument("--values", help="sweep values, comma or space separated")
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        changes = {}
        if args.mode:
            changes["mode"] = args.mode
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.output_dir:
            changes["output_dir"] = args.output_dir
        if args.workers is not None:
            changes["workers"] = args.workers
        elif os.environ.get(WORKERS_ENV):
            changes["workers"] = int(os.environ[WORKERS_ENV])
        cfg = cfg.replace(**changes)
        if args.sweep:
            if not args.values:
                raise ConfigError("--values", "required with --sweep")
            res = sweep(cfg, args.sweep, parse_sweep_values(args.values, args.sweep))
            for r in res.rows:
                print(f"{args.sweep}={r['value']}: error/atom {r['error_au']} au ({r['status']})")
            if res.slope is not None:
                print(f"log-log slope of error vs alpha: {res.slope:.3f}")
            print(f"table written to {res.paths['table']}")
        else:
            out = run(cfg)
            print(out.report.summary())
            print(f"results written to {out.paths['result']}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
