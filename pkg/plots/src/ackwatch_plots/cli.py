"""Command-line figure renderer: consumes an ackwatch figures-data directory."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_IDS, FigureDataError, build_spec, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ackwatch-plots",
        description="Render figure analogues from ackwatch figure-data CSVs",
    )
    parser.add_argument("--input", required=True, help="directory written by 'ackwatch figures-data'")
    parser.add_argument("--out", required=True, help="directory for rendered PNGs")
    parser.add_argument(
        "--figure",
        choices=FIGURE_IDS + ("all",),
        default="all",
        help="which figure to render",
    )
    args = parser.parse_args(argv)

    figures = FIGURE_IDS if args.figure == "all" else (args.figure,)
    try:
        for figure in figures:
            spec = build_spec(figure, args.input)
            result = render(spec, f"{args.out}/{figure}.png")
            print(f"wrote {result.path}")
    except FigureDataError as exc:
        print(f"ackwatch-plots: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ackwatch-plots: i/o failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
