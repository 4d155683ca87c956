"""Render figures from a pipeline manifest: `ofi-plots render ...`."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FIGURES, SchemaError, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="ofi-plots")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("render", help="render one figure from a manifest")
    r.add_argument("--manifest", required=True, type=Path)
    r.add_argument("--figure", required=True,
                   help=f"one of {', '.join(sorted(FIGURES))} or network_<model>")
    r.add_argument("--out", required=True, type=Path)
    args = parser.parse_args(argv)
    try:
        out = render(args.figure, args.manifest, args.out)
    except (FileNotFoundError, KeyError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
