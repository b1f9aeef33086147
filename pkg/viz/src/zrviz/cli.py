"""zrviz: render figures from a zrlab run directory."""

from __future__ import annotations

import argparse
import sys

from .artifacts import ArtifactError
from .plots import KINDS


def main(argv=None) -> int:
    p = argparse.ArgumentParser(
        prog="zrviz", description="Plot zrlab run artifacts (SVG output).")
    p.add_argument("run_dir", help="run directory containing manifest.json")
    p.add_argument("--kind", choices=sorted(KINDS) + ["all"], default="all",
                   help="figure kind (default: every kind the artifacts support)")
    p.add_argument("--out", help="output file (single kind only)")
    args = p.parse_args(argv)

    kinds = sorted(KINDS) if args.kind == "all" else [args.kind]
    if args.out and len(kinds) > 1:
        print("error: --out requires a single --kind", file=sys.stderr)
        return 2
    written = []
    for kind in kinds:
        try:
            written.append(KINDS[kind](args.run_dir, out=args.out))
        except ArtifactError as e:
            if args.kind != "all":
                print(f"error: {e}", file=sys.stderr)
                return 1
            # with --kind all, skip figures this run has no artifacts for
    if not written:
        print("error: no figure could be rendered from this run", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
