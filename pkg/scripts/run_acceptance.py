"""Run every verification suite at full size and print one line per acceptance criterion.

    python3 scripts/run_acceptance.py [--seed N] [--json checks.jsonl]

Exit status is 0 when all twelve criteria pass and 1 otherwise.
"""
import argparse
import sys
import time

from patchlab.verify import SUITES, criteria_summary, run_suite


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write every check as one JSON object per line")
    args = ap.parse_args()

    t0 = time.perf_counter()
    checks = []
    for name in SUITES:
        t = time.perf_counter()
        got = run_suite(name, fast=False, seed=args.seed)
        checks += got
        print(f"# {name}: {sum(c.passed for c in got)}/{len(got)} checks, {time.perf_counter() - t:.1f}s",
              file=sys.stderr)
    seconds = time.perf_counter() - t0
    if args.json:
        with open(args.json, "w") as fh:
            fh.writelines(c.to_json() + "\n" for c in checks)
    summary = criteria_summary(checks, seconds)
    for _, _, line in summary:
        print(line)
    return 0 if all(ok for _, ok, _ in summary) else 1


if __name__ == "__main__":
    sys.exit(main())
