"""Command-line wrapper: map a figure kind plus input CSVs to an image file."""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svmix-report", description=__doc__)
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--inputs", nargs="+", required=True,
                        help="CSV file(s) produced by the estimation CLI")
    parser.add_argument("--out", required=True, help="output image path (.png or .svg)")
    parser.add_argument("--title", default="")
    parser.add_argument("--labels", nargs="*", default=[])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(inputs=args.inputs, kind=args.kind, output=args.out,
                      title=args.title, labels=list(args.labels))
    try:
        path = render(spec)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
