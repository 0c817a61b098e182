"""TD3 / EAS-TD3 training loop and run outputs.

A run directory holds ``metrics.csv``, ``actions.csv``, ``config.resolved``
and ``checkpoints/`` (one ``.mlp`` file per network plus ``manifest.json``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainConfig, dump_config
from .eas import critic_evaluator, run_swarm
from .envs import make_env
from .evaluation import (
    ActionRecord,
    MetricRow,
    QGrowthWindow,
    dump_action_distributions,
    evaluate_policy,
    write_metrics,
)
from .evo_gradient import apply_evo_update, evo_loss_and_grads, sample_evo_batch
from .stores import Archive, ReplayBuffer, StateActionPair, Transition
from .td3 import Td3Agent
from .tensor import adam_step

log = logging.getLogger(__name__)


class Streams:
    """Independent RNG streams so that optional components never shift the others.

    EAS and archive sampling draw from their own streams, which is what makes a
    ``td3`` run bit-identical to an ``eas-td3`` run with evolutionary updates and
    archive writes switched off.
    """

    names = ("init", "env", "explore", "replay", "noise", "eas", "archive", "cem")

    def __init__(self, seed: int):
        children = np.random.SeedSequence(seed).spawn(len(self.names) + 1)
        for name, child in zip(self.names, children):
            setattr(self, name, np.random.default_rng(child))
        # evaluation episodes use seeds from a stream disjoint from training resets
        self.eval_seed = int(children[-1].generate_state(1, dtype=np.uint32)[0])

    def episode_seed(self) -> int:
        return int(self.env.integers(0, 2**31 - 1))


@dataclass
class RunResult:
    config: TrainConfig
    rows: list[MetricRow]
    agent: Td3Agent
    out_dir: Path | None = None
    action_log: list[ActionRecord] = field(default_factory=list)
    replay_size: int = 0
    archive_size: int = 0
    actor_updates: int = 0
    evo_steps: int = 0


class _Window:
    def __init__(self):
        self.critic = []
        self.evo = []
        self.mask = []

    def flush(self) -> tuple[float, float, float]:
        out = tuple(float(np.mean(v)) if v else 0.0 for v in (self.critic, self.evo, self.mask))
        self.critic, self.evo, self.mask = [], [], []
        return out


def finish_run(cfg: TrainConfig, out_dir, agent: Td3Agent, rows, action_log) -> Path | None:
    if out_dir is None:
        return None
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(rows, out / "metrics.csv")
    dump_action_distributions(action_log if cfg.log_actions else [], out / "actions.csv", agent.spec.act_dim)
    (out / "config.resolved").write_text(dump_config(cfg), encoding="utf-8")
    if cfg.save_checkpoint:
        agent.save(out / "checkpoints", extra={"env": cfg.env, "f_reward": cfg.f_reward, "algo": cfg.algo})
    return out


def run_training(cfg: TrainConfig, out_dir=None) -> RunResult:
    """Run one configuration; dispatches to the CEM baseline for ``algo = cem-td3``."""
    cfg.validate()
    if cfg.algo == "cem-td3":
        from .cem import run_cem_td3

        return run_cem_td3(cfg, out_dir)
    return run_td3(cfg, out_dir)


def run_td3(cfg: TrainConfig, out_dir=None) -> RunResult:
    streams = Streams(cfg.seed)
    env = make_env(cfg.env, cfg.f_reward, cfg.max_episode_steps)
    eval_env = make_env(cfg.env, cfg.f_reward, cfg.max_episode_steps)
    spec = env.spec
    bounds = (spec.action_low, spec.action_high)
    agent = Td3Agent(spec, cfg.td3_config(), streams.init)
    replay = ReplayBuffer(cfg.buffer_capacity, spec.obs_dim, spec.act_dim)
    archive = Archive(cfg.archive_capacity, spec.obs_dim, spec.act_dim)
    use_eas = cfg.algo == "eas-td3"
    pso = cfg.pso_config()
    fitness = critic_evaluator(agent.critic1)

    rows: list[MetricRow] = []
    action_log: list[ActionRecord] = []
    q_window = QGrowthWindow()
    window = _Window()
    evo_steps = 0

    s = env.reset(seed=streams.episode_seed())
    for t in range(1, cfg.total_steps + 1):
        if t <= cfg.start_timesteps:
            a = streams.explore.uniform(spec.action_low, spec.action_high)
        else:
            a = agent.select_action(s, True, streams.explore)
        res = env.step(a)
        replay.push(Transition(s, a, res.reward, res.obs, res.done))

        try:
            if use_eas and t > cfg.eas_start:
                pop = run_swarm(s, a, pso, fitness, bounds, streams.eas)
                gain = pop.gbest_fitness - pop.seed_fitness
                q_window.add(gain)
                if cfg.archive_writes:
                    archive.push(StateActionPair(s, pop.gbest))
                if cfg.log_actions:
                    action_log.append(ActionRecord(t, a.copy(), pop.gbest.copy(), gain))

            if t > cfg.start_timesteps:
                batch = replay.sample(cfg.batch_size, streams.replay)
                frozen = cfg.freeze_critic_after is not None and t > cfg.freeze_critic_after
                window.critic.append(agent.update_critics(batch, streams.noise, step=not frozen))
                if agent.actor_due():
                    evo_steps += _actor_slot(cfg, agent, batch, archive, streams, window, use_eas)
                    agent.update_targets()
        except FloatingPointError as err:
            raise FloatingPointError(f"step {t}: {err}") from err

        s = res.obs
        if res.done or res.truncated:
            s = env.reset(seed=streams.episode_seed())

        if t % cfg.eval_every == 0:
            mean, std = evaluate_policy(agent.actor, eval_env, cfg.eval_episodes, streams.eval_seed)
            critic_loss, evo_loss, mask_rate = window.flush()
            rows.append(MetricRow(t, mean, std, q_window.flush(), evo_loss, critic_loss, mask_rate))
            log.info("%s seed=%d step=%d return=%.2f", cfg.algo, cfg.seed, t, mean)

    out = finish_run(cfg, out_dir, agent, rows, action_log)
    return RunResult(
        cfg, rows, agent, out, action_log, len(replay), len(archive), agent.actor_updates, evo_steps
    )


def _actor_slot(cfg, agent: Td3Agent, batch, archive, streams, window, use_eas) -> int:
    """Policy-gradient step, then (EAS only) the evolutionary step.  Returns evo steps taken."""
    evo_on = use_eas and cfg.evo_updates and len(archive) > 0
    if cfg.evo_update_mode == "sequential" or not evo_on:
        agent.update_actor(batch.s)
        if not evo_on:
            return 0
        upd = apply_evo_update(agent, archive, cfg.batch_size, streams.archive, cfg.q_filter_enabled)
        window.evo.append(upd.loss)
        window.mask.append(upd.mask_rate)
        return 0 if upd.skipped else 1
    # combined: one Adam step on the summed gradients
    _, dpg = agent.dpg_gradients(batch.s)
    evo_batch = sample_evo_batch(agent, archive, cfg.batch_size, streams.archive, cfg.q_filter_enabled)
    loss, evo = evo_loss_and_grads(agent.actor, evo_batch)
    adam_step(agent.actor_opt, agent.actor.params, [g1 + g2 for g1, g2 in zip(dpg, evo)])
    agent.actor_updates += 1
    window.evo.append(loss)
    window.mask.append(float(evo_batch.filter_mask.mean()))
    return 1
