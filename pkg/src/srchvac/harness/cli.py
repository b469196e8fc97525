"""Command-line entry point.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 data
errors, 4 file-system errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..errors import ConfigError, DataError, FormatError, IngestionError, ParameterError
from .config import EXPERIMENTS, load_config, validate
from .experiments import run_experiment
from .results import emit_results

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_IO = 0, 2, 3, 4
log = logging.getLogger("srchvac")


def _seeds(text: str) -> list[int]:
    # comma-separated non-negative integers or inclusive ranges a-b
    out = []
    try:
        for part in filter(None, (p.strip() for p in text.split(","))):
            lo, _, hi = part.partition("-")
            out.extend(range(int(lo), int(hi or lo) + 1))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty seed list")
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="srchvac", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config_file", nargs="?", type=Path)
    run.add_argument("--config", type=Path, dest="config_opt")
    run.add_argument("--out-dir", type=Path, default=Path("results"))
    run.add_argument("--seeds", type=_seeds, help="e.g. 0,1,2 or 0-4; overrides the config")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for SRC decisions")
    run.add_argument("--format", choices=("csv", "json"), default="csv")

    sub.add_parser("list-experiments", help="print the known experiment names")

    val = sub.add_parser("validate", help="check a config file without running it")
    val.add_argument("config_file", nargs="?", type=Path)
    val.add_argument("--config", type=Path, dest="config_opt")
    return ap


def _config_path(args):
    path = args.config_opt or args.config_file
    if path is None:
        raise ConfigError("no config file given")
    return path


def _run(args) -> int:
    if args.command == "list-experiments":
        for name, desc in EXPERIMENTS.items():
            print(f"{name:28s} {desc}")
        return EXIT_OK
    cfg = load_config(_config_path(args))
    if args.command == "validate":
        print(f"{_config_path(args)}: ok ({cfg.experiment}, {len(cfg.seeds)} seed(s))")
        return EXIT_OK
    if args.seeds is not None:
        cfg = validate(replace(cfg, seeds=args.seeds))
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")

    def progress(row):
        acc = "" if row.accuracy is None else f" acc={row.accuracy:.4f}"
        pw = "" if row.signal_power is None else f" power={row.signal_power:.6g}"
        log.info("seed=%s %s frac=%s window=%s %s%s%s", row.seed, row.method,
                 row.retained_fraction, row.window_s, row.axis, acc, pw)

    rows, meta = run_experiment(cfg, args.out_dir, args.jobs, progress)
    paths = emit_results(rows, args.out_dir, args.format, meta)
    print(f"{len(rows)} rows -> {paths['results']}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        return _run(args)
    except (ConfigError, ParameterError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FormatError, IngestionError) as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: i/o: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
