"""Diagonal-Gaussian CEM over actor parameters, with TD3 gradient steps on half the
population: a small stand-in for CEM-TD3 used in the network-depth sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import AdamState, flatten_params, load_flat_params


@dataclass
class ParamDistribution:
    mean: np.ndarray
    var: np.ndarray
    elite_frac: float = 0.5
    pop_size: int = 10
    var_floor: float = 1e-6
    # additive exploration variance, shrunk by ``extra_decay`` each generation
    extra_var: float = 0.0
    extra_decay: float = 1.0

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.var = np.maximum(np.asarray(self.var, dtype=np.float64), self.var_floor)
        if self.mean.shape != self.var.shape:
            raise ValueError("mean and variance must have the same shape")
        if not 0.0 < self.elite_frac <= 1.0:
            raise ValueError("elite_frac must lie in (0, 1]")

    def sample(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        n = self.pop_size if n is None else n
        return self.mean + np.sqrt(self.var) * rng.standard_normal((n, self.mean.size))


def cem_update(dist: ParamDistribution, scored: Sequence[tuple[np.ndarray, float]]) -> ParamDistribution:
    """Refit mean and diagonal variance to the top ``ceil(elite_frac * P)`` individuals.

    The new variance is the elite variance (ddof 0) plus ``extra_var``, floored.
    """
    if len(scored) < 2:
        raise ValueError("CEM needs a population of at least 2")
    n_elite = math.ceil(dist.elite_frac * len(scored))
    if n_elite < 1:
        raise ValueError("no elites selected")
    params = np.array([np.asarray(p, dtype=np.float64).ravel() for p, _ in scored])
    returns = np.array([r for _, r in scored], dtype=np.float64)
    # stable sort on the negated returns keeps earlier individuals on ties
    order = np.argsort(-returns, kind="stable")[:n_elite]
    elites = params[order]
    return ParamDistribution(
        mean=elites.mean(axis=0),
        var=elites.var(axis=0) + dist.extra_var,
        elite_frac=dist.elite_frac,
        pop_size=dist.pop_size,
        var_floor=dist.var_floor,
        extra_var=dist.extra_var * dist.extra_decay,
        extra_decay=dist.extra_decay,
    )


def train_individual(
    agent, params: np.ndarray, replay, schedule: tuple[int, int], batch_size: int, rng_replay, rng_noise, losses=None
) -> np.ndarray:
    """Load ``params`` as the actor and return it after one round of TD3 training.

    ``schedule = (critic_steps, actor_steps)``: the shared critics are updated
    first, then the actor (fresh Adam state) with a target update after every
    actor step.
    """
    critic_steps, actor_steps = schedule
    load_flat_params(agent.actor, params)
    load_flat_params(agent.actor_target, params)
    agent.actor_opt = AdamState.for_params(agent.actor.params, lr=agent.cfg.lr)
    for _ in range(critic_steps):
        batch = replay.sample(batch_size, rng_replay)
        loss = agent.update_critics(batch, rng_noise)
        if losses is not None:
            losses.append(loss)
    for _ in range(actor_steps):
        batch = replay.sample(batch_size, rng_replay)
        agent.update_actor(batch.s)
        agent.update_targets()
    return flatten_params(agent.actor)


def run_cem_td3(cfg, out_dir=None):
    """CEM over actor parameters with TD3 steps injected into half the population.

    Each generation samples ``cem_population`` actors.  Once the replay buffer
    is past ``start_timesteps``, each actor of the first half is trained in
    turn: ``G // half`` critic updates then ``G`` actor updates, where ``G`` is
    the number of environment steps of the previous generation.  Every actor
    then plays one noise-free episode into the shared buffer and the
    distribution is refit to the elites.  Metric rows evaluate the
    distribution mean; ``generations.csv`` logs each generation's best and mean
    episode return against the environment step count.
    """
    from .evaluation import MetricRow, evaluate_policy
    from .envs import make_env
    from .stores import ReplayBuffer, Transition
    from .td3 import Td3Agent
    from .trainer import RunResult, Streams, finish_run

    streams = Streams(cfg.seed)
    env = make_env(cfg.env, cfg.f_reward, cfg.max_episode_steps)
    eval_env = make_env(cfg.env, cfg.f_reward, cfg.max_episode_steps)
    spec = env.spec
    agent = Td3Agent(spec, cfg.td3_config(), streams.init)
    replay = ReplayBuffer(cfg.buffer_capacity, spec.obs_dim, spec.act_dim)
    mean = flatten_params(agent.actor)
    dist = ParamDistribution(
        mean,
        np.full_like(mean, cfg.cem_init_var),
        cfg.cem_elite_frac,
        cfg.cem_population,
        cfg.cem_var_floor,
        cfg.cem_extra_var,
        cfg.cem_extra_decay,
    )
    eval_actor = agent.actor.copy()
    rows = []
    generations: list[tuple[int, float, float]] = []
    critic_losses: list[float] = []
    steps = 0
    last_gen_steps = 0
    next_eval = cfg.eval_every
    half = max(1, cfg.cem_population // 2)

    while steps < cfg.total_steps:
        population = dist.sample(streams.cem)
        if steps >= cfg.start_timesteps and last_gen_steps > 0:
            schedule = (last_gen_steps // half, last_gen_steps)
            for i in range(half):
                population[i] = train_individual(
                    agent, population[i], replay, schedule, cfg.batch_size, streams.replay, streams.noise, critic_losses
                )
        gen_steps = 0
        scored = []
        for params in population:
            load_flat_params(eval_actor, params)
            s = env.reset(seed=streams.episode_seed())
            ep_return = 0.0
            while True:
                a = eval_actor.forward(s)
                res = env.step(a)
                replay.push(Transition(s, a, res.reward, res.obs, res.done))
                ep_return += res.reward
                gen_steps += 1
                s = res.obs
                if res.done or res.truncated:
                    break
            scored.append((params, ep_return))
        steps += gen_steps
        last_gen_steps = gen_steps
        dist = cem_update(dist, scored)
        gen_returns = [r for _, r in scored]
        generations.append((steps, max(gen_returns), float(np.mean(gen_returns))))

        while next_eval <= min(steps, cfg.total_steps):
            load_flat_params(eval_actor, dist.mean)
            m, sd = evaluate_policy(eval_actor, eval_env, cfg.eval_episodes, streams.eval_seed)
            closs = float(np.mean(critic_losses)) if critic_losses else 0.0
            critic_losses = []
            rows.append(MetricRow(next_eval, m, sd, 0.0, 0.0, closs, 0.0))
            next_eval += cfg.eval_every

    load_flat_params(agent.actor, dist.mean)
    out = finish_run(cfg, out_dir, agent, rows, [])
    if out is not None:
        lines = ["step,best_return,mean_return\n"] + [f"{t},{b!r},{m!r}\n" for t, b, m in generations]
        (out / "generations.csv").write_text("".join(lines), encoding="utf-8")
    return RunResult(cfg, rows, agent, out, [], len(replay), 0, agent.actor_updates, 0)
