"""Command-line figure renderer for sweep aggregates."""

import argparse
import sys

from .plotting import KINDS, FigureSpec, PlotError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render figures from irswpcn aggregate CSVs")
    parser.add_argument("--csv", required=True, help="aggregate CSV path")
    parser.add_argument("--kind", required=True, choices=sorted(KINDS))
    parser.add_argument("--out", required=True, help="output SVG path")
    parser.add_argument("--schemes", default="",
                        help="comma-separated scheme filter")
    parser.add_argument("--amax", default="",
                        help="comma-separated amplitude caps (dB) filter")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0

    schemes = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    caps = tuple(float(c) for c in args.amax.split(",") if c.strip())
    try:
        spec = FigureSpec(csv_path=args.csv, kind=args.kind,
                          output_path=args.out, schemes=schemes, a_max_db=caps)
        result = render(spec)
    except PlotError as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return 2
    for s in result.series:
        print(f"series {s.scheme} a_max={s.a_max_db:g} dB: {s.num_points} points")
    print(f"wrote {result.path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
