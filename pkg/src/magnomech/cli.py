"""Command-line front end.

Subcommands: ``point <paramfile>``, ``sweep <sweepfile>``, ``preset <name>``,
``validate <paramfile>``. Exit codes: 0 success, 2 configuration error,
3 I/O error. Physics failures at a grid point (instability, blow-up) are
data in the output, never a nonzero exit.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .config import QUANTITIES, document_hash, load_document, validate_document
from .errors import ConfigError
from .presets import PRESETS, preset
from .sweep import STATUS_COLUMNS, SweepConfig, SweepResult, provenance, run_point, run_sweep, to_csv, to_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

log = logging.getLogger("magnomech")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--workers", type=int, default=1, help="worker processes for grid sweeps")
    common.add_argument("--dt", type=float, help="propagation step in seconds")
    common.add_argument("--tol", type=float, help="physicality tolerance")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="magnomech", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("point", parents=[common], help="run one parameter point")
    p.add_argument("paramfile")
    p = sub.add_parser("sweep", parents=[common], help="run the sweep described in a file")
    p.add_argument("sweepfile")
    p = sub.add_parser("preset", parents=[common], help="run a figure preset")
    p.add_argument("name", help="one of: " + ", ".join(PRESETS))
    p.add_argument("--points", type=int, help="grid points per axis (or time samples)")
    p = sub.add_parser("validate", parents=[common], help="check a parameter file")
    p.add_argument("paramfile")
    return parser


def _write(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _apply_overrides(doc, args):
    run = doc.setdefault("run", {})
    if args.dt is not None:
        run["dt"] = args.dt
    if args.tol is not None:
        run["tol"] = args.tol
    return doc


def _render(result: SweepResult, fmt: str) -> str:
    return to_json(result) if fmt == "json" else to_csv(result)


def _run(args) -> int:
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    if args.command == "validate":
        doc = validate_document(_apply_overrides(load_document(args.paramfile), args))
        _write(f"ok {document_hash(doc)}\n", args.out)
        return EXIT_OK
    if args.command == "point":
        doc = _apply_overrides(load_document(args.paramfile), args)
        doc.pop("sweep", None)
        validate_document(doc)
        quantities = list(QUANTITIES)
        record = run_point(doc, quantities)
        columns = quantities + list(STATUS_COLUMNS)
        config = SweepConfig(doc)
        result = SweepResult(columns, [[record[c] for c in columns]], provenance(config))
        _write(_render(result, args.format), args.out)
        return EXIT_OK
    if args.command == "sweep":
        doc = load_document(args.sweepfile)
    else:
        doc = preset(args.name, args.points)
    config = SweepConfig.from_document(_apply_overrides(doc, args))
    log.info("running %s (%d workers)", args.command, args.workers)
    result = run_sweep(config, workers=args.workers)
    _write(_render(result, args.format), args.out)
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
