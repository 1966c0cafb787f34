#!/usr/bin/env python3
"""Run the acceptance checks and print one verdict line per criterion.

Pass criterion numbers to run a subset, e.g. ``run_acceptance.py 5 7``.
With ``--json`` the full clause and detail dictionaries are written too.
Exit status is 0 only when every selected criterion passes.
"""

import argparse
import json
import sys

from uavcomp import acceptance


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("criteria", nargs="*", type=int)
    ap.add_argument("--json", help="write clause-level results to this path")
    args = ap.parse_args(argv)

    results = acceptance.run_all(set(args.criteria) or None)
    if args.json:
        payload = [
            {"criterion": r.number, "title": r.title, "passed": r.passed,
             "clauses": r.clauses, "details": r.details, "seconds": round(r.seconds, 2)}
            for r in results
        ]
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o))
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    return 0 if n_pass == len(results) else 3


if __name__ == "__main__":
    sys.exit(main())
