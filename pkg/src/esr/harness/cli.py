"""Command-line front end.

Exit codes: 0 success, 2 invalid config, 3 numerical failure, 4 I/O error.
"""

import argparse
import sys

from .. import __version__
from ..observables import ZeroProbabilityError
from . import config as config_mod
from .runner import bchsh_sweep, bound_search, resolve_seed, run_analytic, run_monte_carlo

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"esr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("validate", "check a config and print its canonical form"),
        ("run-analytic", "exact probabilities for protocols, bell scenarios and sweeps"),
        ("run-mc", "seeded Monte Carlo verification of the protocols"),
        ("bchsh-sweep", "modified BCHSH values over uniform-efficiency grids"),
        ("bound-search", "largest uniform detection efficiency per bell scenario"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="scenario config file (YAML)")
        p.add_argument("--out-dir", help="write report.txt and CSV tables here")
        p.add_argument("--format", choices=("text", "csv"), default="text", help="stdout format")
        if name == "run-mc":
            p.add_argument("--seed", type=lambda s: int(s, 0), help="override the config seed")
            p.add_argument("--samples", type=int, help="override the config sample count")
    return parser


def _run(args, cfg):
    if args.command == "run-analytic":
        return run_analytic(cfg)
    if args.command == "run-mc":
        seed, source = resolve_seed(cfg, args.seed)
        if not 0 <= seed < 2**64:
            raise config_mod.ConfigError("seed", f"{seed} is not a 64-bit unsigned integer")
        if args.samples is not None and args.samples < 1:
            raise config_mod.ConfigError("samples", "must be at least 1")
        return run_monte_carlo(cfg, seed, source, args.samples)
    if args.command == "bchsh-sweep":
        return bchsh_sweep(cfg)
    return bound_search(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_mod.load(args.config)
    except config_mod.ConfigError as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    if args.command == "validate":
        sys.stdout.write(cfg.dump())
        return EXIT_OK

    try:
        report = _run(args, cfg)
    except config_mod.ConfigError as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ZeroProbabilityError, ArithmeticError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    sys.stdout.write(report.to_text() if args.format == "text" else report.to_csv())
    if args.out_dir:
        try:
            report.write(args.out_dir)
        except OSError as exc:
            print(f"cannot write outputs: {exc}", file=sys.stderr)
            return EXIT_IO
    if not report.ok:
        failed = [c.name for c in report.checks if not c.ok]
        print(f"tolerance breach: {', '.join(failed)}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
