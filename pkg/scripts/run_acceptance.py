"""Run the acceptance criteria and write ``acceptance.json``.

Exit status is 1 if any check fails.
"""

import argparse
import sys

from memflow.acceptance import run_all
from memflow.io import write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("criteria", nargs="*", type=int, help="criterion numbers (default: all)")
    ap.add_argument("--out", default="acceptance.json")
    args = ap.parse_args()
    checks = run_all(set(args.criteria) or None, log=print)
    write_json(args.out, [c.as_json() for c in checks])
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
