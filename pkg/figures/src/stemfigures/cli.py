"""Script interface: stem-figures <csv_dir> <out_dir> [--true-variances CSV-list]."""

from __future__ import annotations

import argparse
import sys

from .render import RenderError, render_all


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stem-figures",
        description="Render case-study figures from the clearing engine's CSVs",
    )
    parser.add_argument("csv_dir", help="directory with fig2/fig3_*/table1 CSVs")
    parser.add_argument("out_dir", help="directory for the rendered artifacts")
    parser.add_argument(
        "--true-variances",
        default=None,
        help="comma-separated true variance per producer (producer 1 first); "
        "defaults to each producer's grid argmax",
    )
    args = parser.parse_args(argv)
    truth = None
    if args.true_variances:
        values = [float(v) for v in args.true_variances.split(",")]
        truth = {i + 1: v for i, v in enumerate(values)}
    try:
        written = render_all(args.csv_dir, args.out_dir, true_variances=truth)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
