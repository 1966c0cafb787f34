#!/usr/bin/env python3
"""Regenerate every figure's CSV data through the command-line entry point.

Each preset writes into its own subdirectory of ``--out`` together with a
manifest holding the resolved config and its hash.  ``--trials`` caps the
Monte-Carlo batch size for quick looks; the presets default to 100 000.
"""

import argparse
import sys
import time
from pathlib import Path

from uavcomp.cli import main as cli_main

FIGURES = ("fig4", "fig5", "fig6", "fig7", "fig8")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results", help="parent output directory")
    ap.add_argument("--trials", type=int, help="Monte-Carlo trials per batch")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--only", nargs="*", choices=FIGURES, help="subset of figures")
    args = ap.parse_args(argv)

    status = 0
    for fig in args.only or FIGURES:
        cmd = ["run", fig, "--out", str(Path(args.out) / fig)]
        if args.trials is not None:
            cmd += ["--trials", str(args.trials)]
        if args.seed is not None:
            cmd += ["--seed", str(args.seed)]
        t0 = time.perf_counter()
        code = cli_main(cmd)
        print(f"{fig}: exit {code} in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
