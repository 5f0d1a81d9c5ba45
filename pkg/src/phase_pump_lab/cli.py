"""Command-line entry point.

    phase-pump-lab <mode|figure> --config PATH [--workers N] [--out DIR]

Modes run the sweep described by the config file.  Figure names write a data
bundle; for them ``--config`` is optional and only its ``[output] dir`` is
used.  Exit status: 0 success, 1 if any sweep point failed, 2 on a
configuration or usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import MODES, parse_config
from .errors import ConfigError, PhasePumpError
from .figures import FIGURES, reproduce_figure
from .sweep import run_sweep

EXIT_OK, EXIT_POINT_FAILED, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("phase_pump_lab")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors share the config-error status
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="phase-pump-lab",
                 description="Phase-particle pump simulations; writes CSV data only.")
    ap.add_argument("target", choices=list(MODES) + sorted(FIGURES),
                    help="simulation mode or figure name")
    ap.add_argument("--config", help="run configuration file")
    ap.add_argument("--workers", type=int, default=1, help="parallel sweep workers")
    ap.add_argument("--out", help="output directory (overrides [output] dir)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    cfg = None
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = parse_config(fh.read())
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG

    if args.target in FIGURES:
        out = args.out or (cfg.out_dir if cfg else ".")
        try:
            files = reproduce_figure(args.target, out, workers=args.workers)
        except PhasePumpError as exc:
            print(f"error: {args.target}: {exc}", file=sys.stderr)
            return EXIT_POINT_FAILED
        for f in files:
            print(f)
        return EXIT_OK

    if cfg is None:
        print(f"error: mode {args.target} requires --config", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.mode != args.target:
        print(f"config error: config describes mode {cfg.mode!r}, not {args.target!r}",
              file=sys.stderr)
        return EXIT_CONFIG
    res = run_sweep(cfg, workers=args.workers, out_dir=args.out)
    print(res.csv_path)
    if res.status:
        print(f"{res.n_failed} of {len(res.rows)} points failed; see the error column",
              file=sys.stderr)
    return res.status


if __name__ == "__main__":
    sys.exit(main())
