"""Command-line front end for trace rendering."""

import argparse
import sys

from .render import FORMATS, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dynplots",
        description="Render figures from dynamic-clustering trace CSVs")
    sub = p.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("render", help="render all traces under a directory")
    pr.add_argument("--in", dest="in_dir", required=True,
                    help="directory scanned recursively for trace.csv")
    pr.add_argument("--out", dest="out_dir", required=True)
    pr.add_argument("--format", dest="fmt", choices=FORMATS, default="png")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        written = render(args.in_dir, args.out_dir, fmt=args.fmt)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    if not written:
        print("no trace.csv files found", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
