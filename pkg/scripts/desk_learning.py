"""TD3 vs EAS-TD3 on pendulum at desk scale, several seeds.

    python3 scripts/desk_learning.py --seeds 5 --out runs/desk
"""

import argparse
from pathlib import Path

import numpy as np

from eastd3.config import parse_value, profile_config
from eastd3.envs import make_env
from eastd3.evaluation import random_policy_return
from eastd3.trainer import run_training


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--env", default="pendulum")
    p.add_argument("--out", default="runs/desk")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    args = p.parse_args()
    extra = {k.strip(): parse_value(k.strip(), v) for k, v in (kv.split("=", 1) for kv in args.override)}

    finals = {}
    for algo in ("td3", "eas-td3"):
        for seed in range(args.seeds):
            cfg = profile_config("desk", **{"env": args.env, **extra, "algo": algo, "seed": seed})
            res = run_training(cfg, Path(args.out) / f"{algo}-s{seed}")
            finals.setdefault(algo, []).append(res.rows[-1].eval_mean_return)
            q = [r.q_growth_mean for r in res.rows]
            print(f"{algo:8s} seed {seed}: final {finals[algo][-1]:9.2f}  mean q_growth {np.mean(q):.4f}")

    base = random_policy_return(make_env(args.env), 100, 0)
    print(f"\nrandom policy return {base:.2f}")
    for algo, vals in finals.items():
        print(f"{algo:8s} median final {np.median(vals):9.2f}  (min {min(vals):.2f}, max {max(vals):.2f})")


if __name__ == "__main__":
    main()
