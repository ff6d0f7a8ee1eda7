"""figplots render --manifest <path> --kind <kind> --out <png>"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import MissingInputError
from .render import FigureKind, FigureSpec, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="figplots",
        description="render arraymusic run/sweep outputs into figures",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    rend = subs.add_parser("render", help="render one figure")
    rend.add_argument("--manifest", required=True, help="run or sweep manifest")
    rend.add_argument("--kind", required=True,
                      choices=[k.value for k in FigureKind])
    rend.add_argument("--out", required=True, help="output image path")

    args = parser.parse_args(argv)
    spec = FigureSpec(Path(args.manifest), FigureKind(args.kind),
                      Path(args.out))
    try:
        out = render(spec)
    except MissingInputError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
