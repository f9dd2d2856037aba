"""Command-line front end.

    h2entangle model     [--config F] [--out DIR]
    h2entangle simulate  [--config F] [--out DIR] [--seed N] [--threads N]
    h2entangle analyze   EVENTS [--config F] [--out DIR]
    h2entangle fit       INPUT_DIR [--config F] [--out DIR]
    h2entangle selfcheck [--config F] [--seed N]
    h2entangle default-config

Exit codes: 0 ok, 1 usage, 2 config, 3 data, 4 acceptance failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .config import DEFAULT_CONFIG_TEXT, ConfigError, default_config, load_config

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_DATA, EXIT_ACCEPTANCE = 0, 1, 2, 3, 4

log = logging.getLogger("h2entangle")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides [output] directory)")
    common.add_argument("--seed", type=int, help="override [simulation] seed")
    common.add_argument("--threads", type=int, help="worker threads for event generation")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="h2entangle", description="XUV-IR pump-probe asymmetry model, simulator and analysis")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("model", parents=[common], help="write model A(KER, tau) maps")
    sub.add_parser("simulate", parents=[common], help="generate an event file")
    p = sub.add_parser("analyze", parents=[common], help="histogram and analyse an event file")
    p.add_argument("events", help="event file (.atl)")
    p = sub.add_parser("fit", parents=[common], help="fit analysis or model outputs")
    p.add_argument("input", help="directory with delay_scan.csv/projections.csv or model_map_*.csv")
    sub.add_parser("selfcheck", parents=[common], help="run the acceptance suite")
    sub.add_parser("default-config", help="print the default configuration")
    return parser


def _config(args):
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg = cfg.with_threads(args.threads)
    if args.out:
        cfg = cfg.with_output(args.out)
    return cfg


def main(argv=None) -> int:
    from .eventfile import EventFileError
    from .pipeline import DataError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "default-config":
        sys.stdout.write(DEFAULT_CONFIG_TEXT)
        return EXIT_OK
    try:
        cfg = _config(args)
        out = cfg.output.directory
        from . import pipeline
        if args.command == "model":
            s = pipeline.run_model(cfg, out)
            print(f"model maps written to {out} (period {s['period_fs']:.4f} fs, config {cfg.hash_hex[:12]})")
        elif args.command == "simulate":
            s = pipeline.run_simulate(cfg, out)
            print(f"{s['n_events']} events written to {out}/{pipeline.EVENT_FILE} (seed {cfg.simulation.seed})")
        elif args.command == "analyze":
            s = pipeline.run_analyze(cfg, args.events, out)
            print(f"analysed {s['n_events']} events into {out}")
            for w in s["warnings"]:
                print(f"warning: {w}", file=sys.stderr)
        elif args.command == "fit":
            pipeline.run_fit(cfg, args.input, out)
            print(f"fit results written to {out}/fit.json")
        elif args.command == "selfcheck":
            results = pipeline.run_selfcheck(cfg, args.seed)
            for r in results:
                print(r.line())
            failed = [r for r in results if not r.passed]
            print(f"{len(results) - len(failed)}/{len(results)} acceptance checks passed")
            return EXIT_ACCEPTANCE if failed else EXIT_OK
    except UsageError as exc:
        print(f"h2entangle: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EventFileError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
