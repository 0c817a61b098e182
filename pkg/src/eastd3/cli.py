"""Command line: ``train``, ``eval`` and ``sweep``.

    eastd3 train --config runs/desk.cfg --override seed=3 --out runs/desk-3
    eastd3 eval --checkpoint runs/desk-3/checkpoints --episodes 10
    eastd3 sweep --recipe experiments/toy_depth_sweep/recipe.cfg
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import sys
from pathlib import Path

from .config import config_from_mapping, format_value, load_config, parse_lines
from .envs import make_env
from .evaluation import evaluate_policy
from .td3 import Td3Agent
from .trainer import run_training

log = logging.getLogger("eastd3")


def _default_out(cfg) -> Path:
    return Path("runs") / f"{cfg.env}-{cfg.algo}-s{cfg.seed}"


def cmd_train(args) -> int:
    overrides = list(args.override) + ([f"algo={args.algo}"] if args.algo else [])
    cfg = load_config(args.config, overrides)
    out = Path(args.out) if args.out else _default_out(cfg)
    res = run_training(cfg, out)
    last = res.rows[-1].eval_mean_return if res.rows else float("nan")
    print(f"wrote {out} ({len(res.rows)} metric rows, final return {last:.3f})")
    return 0


def _checkpoint_dir(path: Path) -> Path:
    return path / "checkpoints" if (path / "checkpoints" / "manifest.json").exists() else path


def cmd_eval(args) -> int:
    ckpt = _checkpoint_dir(Path(args.checkpoint))
    manifest = json.loads((ckpt / "manifest.json").read_text(encoding="utf-8"))
    env_id = args.env or manifest.get("env")
    if env_id is None:
        raise SystemExit("checkpoint does not name its environment; pass --env")
    agent = Td3Agent.load(ckpt)
    env = make_env(env_id, manifest.get("f_reward", 0), manifest["max_episode_steps"])
    mean, std = evaluate_policy(agent.actor, env, args.episodes, args.seed)
    print(f"env={env_id} episodes={args.episodes} mean_return={mean!r} std_return={std!r}")
    return 0


# -- sweeps -------------------------------------------------------------------
def read_recipe(path) -> tuple[dict[str, str], dict[str, list[str]], list[int], Path]:
    """Split a recipe into base settings, swept keys, seeds and output root.

    ``sweep.<key> = v1 | v2 | ...`` lists values for one key; the sweep is the
    product over all swept keys and ``seeds``.
    """
    raw = parse_lines(Path(path).read_text(encoding="utf-8"))
    seeds = [int(s) for s in raw.pop("seeds", "0").split(",") if s.strip()]
    out = Path(raw.pop("out", Path("runs") / Path(path).parent.name))
    swept = {k[len("sweep.") :]: [v.strip() for v in raw.pop(k).split("|")] for k in list(raw) if k.startswith("sweep.")}
    return raw, swept, seeds, out


def run_sweep(recipe, out=None, progress=print) -> Path:
    base, swept, seeds, default_out = read_recipe(recipe)
    root = Path(out) if out else default_out
    root.mkdir(parents=True, exist_ok=True)
    keys = list(swept)
    summary = []
    for combo in itertools.product(*(swept[k] for k in keys)):
        for seed in seeds:
            settings = {**base, **dict(zip(keys, combo)), "seed": str(seed)}
            cfg = config_from_mapping(settings)
            name = "_".join(f"{k}={v.replace(',', '-')}" for k, v in zip(keys, combo)) + f"_seed={seed}"
            res = run_training(cfg, root / name)
            final = res.rows[-1].eval_mean_return if res.rows else float("nan")
            summary.append([name, seed, *combo, format_value(final)])
            progress(f"{name}: final return {final:.3f}")
    path = root / "summary.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "seed", *keys, "final_return"])
        w.writerows(summary)
    return path


def cmd_sweep(args) -> int:
    path = run_sweep(args.recipe, args.out)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eastd3", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one configuration")
    t.add_argument("--config", help="key = value config file (omit for the full-scale profile)")
    t.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    t.add_argument("--algo", choices=["td3", "eas-td3", "cem-td3"], help="shorthand for --override algo=...")
    t.add_argument("--out", help="run directory (default runs/<env>-<algo>-s<seed>)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a saved actor without exploration noise")
    e.add_argument("--checkpoint", required=True, help="checkpoints/ directory or its run directory")
    e.add_argument("--episodes", type=int, default=10)
    e.add_argument("--seed", type=int, default=0, help="first evaluation episode seed")
    e.add_argument("--env", help="override the environment recorded in the checkpoint")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="run every configuration of a recipe")
    s.add_argument("--recipe", required=True)
    s.add_argument("--out", help="output root (default from the recipe)")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
