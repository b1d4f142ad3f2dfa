"""Refinement censuses: the indicator multiplier ratio and the log-estimate ratio of each built-in scenario.

    python3 scripts/census.py [--fast] [--seed N]
"""
import argparse

from patchlab.verify import LOG_RATIO_BOUND, log_ratio_census, multiplier_census

ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
ap.add_argument("--fast", action="store_true", help="smaller grids; the 3-D scenario is not refined")
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

ns, m = ((64, 128), 10) if args.fast else ((128, 256), 50)
mult = multiplier_census(ns, m, args.seed)
print("multiplier: n,max_ratio")
for n, rep in mult.items():
    print(f"  {n},{rep.max_ratio:.6g}")

print(f"log-estimate ratio (bound {LOG_RATIO_BOUND}): scenario,base,refined,growth")
for name, (lo, hi) in log_ratio_census(args.fast).items():
    print(f"  {name},{lo:.6g},{hi:.6g},{hi / lo - 1:+.3f}")
