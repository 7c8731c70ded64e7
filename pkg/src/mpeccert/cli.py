"""Check stationarity and constraint qualifications of nonsmooth MPECs.

    mpeccert check FILE [--point 0,0] [--format text]
    mpeccert stationarity FILE --kind gs
    mpeccert cq FILE --probe-depth 16
    mpeccert convexity FILE --seed 3

Exit codes: 0 ran to completion, 1 parse or validation error, 2 internal error.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from . import __version__
from .errors import DimensionMismatch, ParseError, ValidationError
from .pipeline import SECTIONS, Flags, emit, run_file
from .problem_io import load_problem

HELP = {
    "check": "full report with every section",
    "stationarity": "GS/GA stationarity with multiplier certificates",
    "cq": "GS-ACQ, MPEC-ACQ, Zangwill and weak reverse convex CQ",
    "convexity": "generalized convexity checks and the sufficiency verdict",
}

SUBCOMMANDS = {
    "check": SECTIONS,
    "stationarity": ("stationarity",),
    "cq": ("cq",),
    "convexity": ("stationarity", "convexity"),
}


def parse_point(text: str) -> tuple:
    try:
        return tuple(Fraction(c.strip()) for c in text.split(","))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a comma-separated rational point: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpeccert", description=__doc__.splitlines()[0] or None)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("file", help="JSON problem file")
        p.add_argument("--point", type=parse_point,
                       help="candidate point, e.g. 0,1/2 (default: every point in the file)")
        p.add_argument("--label", help="use the file's point with this label")
        p.add_argument("--kind", choices=("gs", "ga", "both"), default="both",
                       help="which stationarity notions to decide")
        p.add_argument("--seed", type=int, default=0, help="seed for every sampler")
        p.add_argument("--format", choices=("json", "text"), default="text")
        p.add_argument("--branch-cap", type=int, default=20,
                       help="refuse GA enumeration when |Omega| exceeds this")
        p.add_argument("--probe-depth", type=int, default=20,
                       help="tangent probe steps 2^-1 .. 2^-depth")
        p.add_argument("-o", "--output", help="write the report here instead of stdout")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        pf = load_problem(args.file)
        point = args.point
        if args.label is not None:
            point = pf.point(args.label)
        if point is not None and len(point) != pf.problem.n:
            raise ValidationError(f"point has {len(point)} coordinates, problem has {pf.problem.n}",
                                  "--point")
        if point is None and not pf.points:
            raise ValidationError("no --point given and the file lists no points", "points")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, ValidationError, DimensionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    flags = Flags(sections=SUBCOMMANDS[args.command], kind=args.kind, seed=args.seed,
                  branch_cap=args.branch_cap, probe_depth=args.probe_depth)
    try:
        doc = run_file(pf, flags, point)
        if args.label is not None:
            doc["reports"][0]["point"]["label"] = args.label
        data = emit(doc, args.format)
    except Exception as exc:  # noqa: BLE001 - exit code 2 reports any internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if args.output:
        with open(args.output, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
