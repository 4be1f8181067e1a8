"""`onfsim-render --figure fig5a --in results/ --out figs/fig5a.png`"""

from __future__ import annotations

import argparse
import os
import sys

from .figures import FIGURES, InputError, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="onfsim-render",
        description="Regenerate figures from onfsim CSV/JSON artifacts")
    p.add_argument("--figure", required=True,
                   help=f"one of: {', '.join(sorted(FIGURES))}")
    p.add_argument("--in", dest="input_dir", required=True,
                   help="directory with onfsim outputs")
    p.add_argument("--out", required=True, help="output image path")
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "render":  # tolerated leading subcommand token
        argv = argv[1:]
    args = build_parser().parse_args(argv)
    if not os.path.isdir(args.input_dir):
        print(f"input directory not found: {args.input_dir}",
              file=sys.stderr)
        return 2
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    try:
        render(args.figure, args.input_dir, args.out)
    except KeyError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except (SchemaError, InputError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
