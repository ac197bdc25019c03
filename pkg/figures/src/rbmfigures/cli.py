"""Command-line front end: one figure per invocation.

Exit codes: 0 success, 2 schema or argument problem, 3 missing input file.
"""

import argparse
import sys

from .render import FigureSpec, MissingSeriesError, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbmgradlab-figures",
        description="Render ratio-vs-k error-bar figures from a report CSV",
    )
    parser.add_argument("--in", dest="csv_path", required=True,
                        help="report CSV produced by the profiling CLI")
    parser.add_argument("--strategy", required=True,
                        choices=["cd", "icd", "pcd"])
    parser.add_argument("--epochs",
                        help="comma-separated epochs to plot (default: all)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--format", dest="image_format",
                        choices=["png", "svg"],
                        help="image format (default: from --out suffix)")
    parser.add_argument("--log-y", action="store_true",
                        help="log-scale the ratio axis")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    image_format = args.image_format
    if image_format is None:
        suffix = args.out.rsplit(".", 1)[-1].lower()
        image_format = suffix if suffix in ("png", "svg") else "png"
    try:
        epochs = tuple(int(e) for e in args.epochs.split(",")) \
            if args.epochs else ()
    except ValueError:
        print(f"error: bad --epochs value {args.epochs!r}", file=sys.stderr)
        return 2
    spec = FigureSpec(csv_path=args.csv_path, strategy=args.strategy,
                      out_path=args.out, epochs=epochs,
                      image_format=image_format, log_y=args.log_y)
    try:
        out = render(spec)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (SchemaError, MissingSeriesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
