"""Command line: plot --out fig.png --panel both LABEL=path [LABEL=path ...]

Exits nonzero on malformed input: 1 for usage errors, 2 for unreadable or
malformed summary files.
"""

from __future__ import annotations

import argparse
import sys

from .render import PANELS, SeriesSpec, render


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _parse_series(text: str) -> SeriesSpec:
    label, sep, path = text.partition("=")
    if not sep or not label or not path:
        raise _UsageError(f"series must look like LABEL=path, got {text!r}")
    return SeriesSpec(label=label, path=path)


def main(argv=None) -> int:
    parser = _Parser(prog="dcb-arena-plot", description=__doc__)
    parser.add_argument("--out", required=True, help="output image (png or svg)")
    parser.add_argument("--panel", choices=PANELS, default="both")
    parser.add_argument("series", nargs="+", metavar="LABEL=path")
    try:
        args = parser.parse_args(argv)
        render([_parse_series(s) for s in args.series], args.out, args.panel)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


def run_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run_main()
