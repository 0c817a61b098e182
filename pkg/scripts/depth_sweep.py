"""Policy-depth sweep for cem-td3 and eas-td3; prints depth-4 / depth-1 score ratios.

    python3 scripts/depth_sweep.py --recipe experiments/toy_depth_sweep/recipe.cfg
"""

import argparse
import csv

import numpy as np

from eastd3.cli import run_sweep
from eastd3.envs import make_env
from eastd3.evaluation import normalized_score, random_policy_return


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--recipe", default="experiments/toy_depth_sweep/recipe.cfg")
    p.add_argument("--out", help="output root (default from the recipe)")
    args = p.parse_args()

    summary = run_sweep(args.recipe, args.out)
    with open(summary, newline="") as fh:
        rows = list(csv.DictReader(fh))
    base = random_policy_return(make_env("pendulum"), 100, 0)
    table = {}
    for r in rows:
        depth = r["actor_hidden"].count(",") + 1
        table.setdefault((r["algo"], depth), []).append(float(r["final_return"]))
    print(f"random policy return {base:.2f}")
    for algo in sorted({a for a, _ in table}):
        meds = {d: float(np.median(v)) for (a, d), v in table.items() if a == algo}
        line = "  ".join(f"d{d} {m:8.2f}" for d, m in sorted(meds.items()))
        ratio = normalized_score(meds[max(meds)], base) / normalized_score(meds[min(meds)], base)
        print(f"{algo:8s} {line}   deepest/shallowest score ratio {ratio:.2f}")


if __name__ == "__main__":
    main()
