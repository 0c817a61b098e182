"""Q-filtered imitation loss pulling the actor toward archived evolutionary actions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stores import Archive
from .td3 import Td3Agent
from .tensor import Mlp, adam_step


@dataclass
class EvoBatch:
    states: np.ndarray
    evo_actions: np.ndarray
    filter_mask: np.ndarray

    def __post_init__(self):
        n = len(self.states)
        if len(self.evo_actions) != n or len(self.filter_mask) != n:
            raise ValueError("states, evo_actions and filter_mask must have equal length")


@dataclass
class EvoUpdate:
    loss: float
    mask_rate: float
    # True when the actor was left untouched (empty archive or every sample filtered)
    skipped: bool


def q_filter(agent: Td3Agent, states, evo_actions) -> np.ndarray:
    """Per-sample gate: 1.0 where Q1(s, a_evo) > Q1(s, mu(s)) strictly, else 0.0."""
    states = np.atleast_2d(states)
    evo_actions = np.atleast_2d(evo_actions)
    policy_actions = agent.actor.forward(states)
    q_evo = agent.critic1.forward(np.concatenate([states, evo_actions], axis=1), batch_invariant=True)
    q_pol = agent.critic1.forward(np.concatenate([states, policy_actions], axis=1), batch_invariant=True)
    return (q_evo[:, 0] > q_pol[:, 0]).astype(np.float64)


def evo_loss(actor: Mlp, batch: EvoBatch) -> float:
    return evo_loss_and_grads(actor, batch)[0]


def evo_loss_and_grads(actor: Mlp, batch: EvoBatch) -> tuple[float, list[np.ndarray]]:
    """``mean_i mask_i * ||mu(s_i) - a_evo_i||^2`` and its parameter gradient."""
    n = len(batch.states)
    if n == 0:
        raise ValueError("empty evolutionary batch")
    mu, cache = actor.forward_cached(batch.states)
    diff = (mu - batch.evo_actions) * batch.filter_mask[:, None]
    loss = float(np.sum(diff * (mu - batch.evo_actions)) / n)
    grads, _ = actor.backward(cache, (2.0 / n) * diff)
    return loss, grads


def sample_evo_batch(agent: Td3Agent, archive: Archive, batch_size: int, rng, q_filter_enabled: bool = True) -> EvoBatch:
    states, evo_actions = archive.sample(batch_size, rng)
    if q_filter_enabled:
        mask = q_filter(agent, states, evo_actions)
    else:
        mask = np.ones(len(states))
    return EvoBatch(states, evo_actions, mask)


def apply_evo_update(
    agent: Td3Agent,
    archive: Archive,
    batch_size: int,
    rng: np.random.Generator,
    q_filter_enabled: bool = True,
) -> EvoUpdate:
    """One Adam step on the actor toward a Q-filtered archive batch.

    The actor shares its Adam state with the policy-gradient step.  When every
    sample is filtered the step is skipped outright: an Adam step on a zero
    gradient would still move parameters through the stored momentum.
    """
    if len(archive) == 0:
        return EvoUpdate(0.0, 0.0, True)
    batch = sample_evo_batch(agent, archive, batch_size, rng, q_filter_enabled)
    rate = float(batch.filter_mask.mean())
    if rate == 0.0:
        return EvoUpdate(0.0, 0.0, True)
    loss, grads = evo_loss_and_grads(agent.actor, batch)
    adam_step(agent.actor_opt, agent.actor.params, grads)
    return EvoUpdate(loss, rate, False)
