"""Policy evaluation, Q-growth accounting, and the CSV outputs of a run."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .eas import critic_evaluator
from .tensor import Mlp


def rollout_return(actor: Mlp, env, seed: int) -> float:
    """Undiscounted return of one noise-free episode, summed in step order."""
    s = env.reset(seed=seed)
    total = 0.0
    while True:
        res = env.step(actor.forward(s))
        total += res.reward
        s = res.obs
        if res.done or res.truncated:
            return total


def evaluate_policy(actor: Mlp, env, episodes: int, seed: int) -> tuple[float, float]:
    """Mean and (population) std of returns over episodes seeded ``seed, seed+1, ...``."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    returns = np.array([rollout_return(actor, env, seed + i) for i in range(episodes)])
    return float(returns.mean()), float(returns.std())


def random_policy_return(env, episodes: int, seed: int) -> float:
    """Mean return of the uniform-random policy; the zero point of normalized scores."""
    rng = np.random.default_rng(seed)
    totals = []
    for i in range(episodes):
        env.reset(seed=seed + i)
        total = 0.0
        while True:
            res = env.step(rng.uniform(env.spec.action_low, env.spec.action_high))
            total += res.reward
            if res.done or res.truncated:
                break
        totals.append(total)
    return float(np.mean(totals))


def normalized_score(ret: float, random_ret: float) -> float:
    """Return measured from the random-policy baseline: 0 for random play, larger is better."""
    return float(ret - random_ret)


class QGrowthWindow:
    """Accumulates Q(s, a_evo) - Q(s, a) between metric rows."""

    def __init__(self):
        self.values: list[float] = []

    def add(self, gain: float) -> None:
        self.values.append(float(gain))

    def flush(self) -> float:
        """Mean of the window (0.0 when nothing was recorded), then clear it."""
        mean = float(np.mean(self.values)) if self.values else 0.0
        self.values = []
        return mean


def record_q_growth(agent, s, a, a_evo, accumulator: QGrowthWindow) -> float:
    q = critic_evaluator(agent.critic1)(s, np.stack([a, a_evo]))
    gain = float(q[1] - q[0])
    accumulator.add(gain)
    return gain


@dataclass
class MetricRow:
    step: int
    eval_mean_return: float
    eval_std_return: float
    q_growth_mean: float
    evo_loss: float
    critic_loss: float
    mask_rate: float


METRIC_HEADER = [f.name for f in fields(MetricRow)]


def _fmt(x) -> str:
    return str(x) if isinstance(x, (int, np.integer)) else repr(float(x))


def write_metrics(rows: Sequence[MetricRow], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_HEADER)
        for row in rows:
            w.writerow([_fmt(v) for v in astuple(row)])
    return path


def read_metrics(path) -> list[MetricRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [
            MetricRow(int(r["step"]), *(float(r[k]) for k in METRIC_HEADER[1:]))
            for r in reader
        ]


@dataclass
class ActionRecord:
    step: int
    action: np.ndarray
    evo_action: np.ndarray
    q_gain: float


def action_header(act_dim: int) -> list[str]:
    return ["step", *(f"a{i}" for i in range(act_dim)), *(f"ae{i}" for i in range(act_dim)), "q_gain"]


def dump_action_distributions(log: Sequence[ActionRecord], out_path, act_dim: int) -> Path:
    """CSV of executed vs evolutionary actions per logged step (header always written)."""
    out_path = Path(out_path)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(action_header(act_dim))
        for rec in log:
            w.writerow([rec.step, *map(_fmt, rec.action), *map(_fmt, rec.evo_action), _fmt(rec.q_gain)])
    return out_path


def read_action_log(path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(steps, actions, evo_actions, q_gains)`` arrays from an actions CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = (len(header) - 2) // 2
    if not body:
        empty = np.zeros((0, d))
        return np.zeros(0, dtype=int), empty, empty.copy(), np.zeros(0)
    arr = np.array([[float(x) for x in r] for r in body])
    return arr[:, 0].astype(int), arr[:, 1 : 1 + d], arr[:, 1 + d : 1 + 2 * d], arr[:, -1]


def window_means(steps: np.ndarray, values: np.ndarray, window: int) -> dict[int, np.ndarray]:
    """Mean of ``values`` per step window ``[k*window + 1, (k+1)*window]``, keyed by k."""
    out: dict[int, np.ndarray] = {}
    keys = (np.asarray(steps) - 1) // window
    for k in np.unique(keys):
        out[int(k)] = np.asarray(values)[keys == k].mean(axis=0)
    return out
