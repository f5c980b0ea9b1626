"""Command line entry point: ``verify <scenario> [options]``.

Exit status 0 when every executed check passes, 1 when a check fails and 2
for usage or scenario errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .report import emit_report
from .scenario import ScenarioError, bundled_names, load_scenario
from .suites import SUITES, UnknownSuiteError, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text, n=None):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} numbers, got {text!r}")
    return vals


def _box(text):
    lo, hi = _floats(text, 2)
    if not lo < hi:
        raise argparse.ArgumentTypeError("box needs LO < HI")
    return [lo, hi]


def _grid(text):
    vals = _floats(text)
    if len(vals) < 2 or any(v != int(v) or v < 4 for v in vals):
        raise argparse.ArgumentTypeError("grid needs at least two integers >= 4")
    return [int(v) for v in vals]


def build_parser():
    p = _Parser(prog="verify", description="Check Hamiltonian Lie algebroid scenarios.")
    p.add_argument("scenario", help="scenario file, or the name of a bundled scenario")
    p.add_argument("--suite", default="all", help=f"all, {', '.join(SUITES)} (default all)")
    p.add_argument("--tol", type=float, help="default residual tolerance")
    p.add_argument("--samples", type=int, help="number of sample points")
    p.add_argument("--seed", type=int, help="sampling seed")
    p.add_argument("--box", type=_box, help="sampling box LO,HI")
    p.add_argument("--grid", type=_grid, help="torus sizes for the sigma suite, e.g. 8,16,32")
    p.add_argument("--report", help="write the report to this path instead of stdout")
    p.add_argument("--format", choices=("human", "json"), default="human")
    p.add_argument("--timing", action="store_true", help="include wall times in the report")
    p.add_argument("--list", action="store_true", help="list bundled scenarios and exit")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "--list":
        print("\n".join(bundled_names()))
        return EXIT_OK
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if args.samples is not None and args.samples < 1:
        print("verify: error: --samples must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        sc = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"verify: scenario error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    overrides = {"tol": args.tol, "samples": args.samples, "seed": args.seed, "box": args.box,
                 "grid": args.grid}
    try:
        report = run_suite(sc, args.suite, overrides, timing=args.timing)
    except UnknownSuiteError as exc:
        print(f"verify: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    data = emit_report(report, args.format)
    if args.report:
        Path(args.report).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
