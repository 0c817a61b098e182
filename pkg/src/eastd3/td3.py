"""TD3 agent: deterministic actor, twin critics, target smoothing, delayed actor updates."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .envs import EnvSpec
from .stores import TransitionBatch
from .tensor import AdamState, Mlp, adam_step, load_mlp, mse, save_mlp, soft_update


@dataclass
class Td3Config:
    actor_hidden: tuple[int, ...] = (400, 300)
    critic_hidden: tuple[int, ...] = (400, 300)
    lr: float = 1e-3
    gamma: float = 0.99
    tau: float = 5e-3
    policy_update_freq: int = 2
    exploration_sigma: float = 0.1
    target_noise_sigma: float = 0.2
    target_noise_clip: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if self.policy_update_freq < 1:
            raise ValueError("policy_update_freq must be positive")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


def critic_loss_and_grads(net: Mlp, sa: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """``mse(net(sa), y)`` and its parameter gradient."""
    q, cache = net.forward_cached(sa)
    grads, _ = net.backward(cache, (2.0 / len(y)) * (q - y[:, None]))
    return mse(q[:, 0], y), grads


class Td3Agent:
    """Online and target networks plus one Adam state per online network.

    Noise scales are given in units of the action half-range, so for the
    ``[-1, 1]`` tasks they are absolute.
    """

    def __init__(self, spec: EnvSpec, cfg: Td3Config, rng: np.random.Generator):
        self.spec = spec
        self.cfg = cfg
        self.low = spec.action_low
        self.high = spec.action_high
        self._half = (self.high - self.low) / 2.0
        actor_sizes = (spec.obs_dim, *cfg.actor_hidden, spec.act_dim)
        critic_sizes = (spec.obs_dim + spec.act_dim, *cfg.critic_hidden, 1)
        self.actor = Mlp.random(actor_sizes, rng, "tanh", self.low, self.high)
        self.critic1 = Mlp.random(critic_sizes, rng)
        self.critic2 = Mlp.random(critic_sizes, rng)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        self.actor_opt = AdamState.for_params(self.actor.params, lr=cfg.lr)
        self.critic1_opt = AdamState.for_params(self.critic1.params, lr=cfg.lr)
        self.critic2_opt = AdamState.for_params(self.critic2.params, lr=cfg.lr)
        self.critic_updates = 0
        self.actor_updates = 0

    # -- acting -------------------------------------------------------------
    def act(self, s) -> np.ndarray:
        return self.actor.forward(s)

    def select_action(self, s, explore: bool, rng: np.random.Generator | None = None) -> np.ndarray:
        a = self.actor.forward(s)
        if not explore or self.cfg.exploration_sigma == 0.0:
            return a
        noise = rng.normal(0.0, self.cfg.exploration_sigma, size=a.shape) * self._half
        return np.clip(a + noise, self.low, self.high)

    def q1(self, s, a) -> np.ndarray:
        """Critic-1 values for a batch of states and actions, shape ``(B,)``."""
        return self.critic1.forward(np.concatenate([np.atleast_2d(s), np.atleast_2d(a)], axis=1))[:, 0]

    # -- critic -------------------------------------------------------------
    def target_values(self, batch: TransitionBatch, rng: np.random.Generator | None) -> np.ndarray:
        cfg = self.cfg
        a_next = self.actor_target.forward(batch.s_next)
        if cfg.target_noise_sigma > 0.0:
            noise = rng.normal(0.0, cfg.target_noise_sigma, size=a_next.shape)
            noise = np.clip(noise, -cfg.target_noise_clip, cfg.target_noise_clip) * self._half
            a_next = np.clip(a_next + noise, self.low, self.high)
        sa_next = np.concatenate([batch.s_next, a_next], axis=1)
        q_next = np.minimum(self.critic1_target.forward(sa_next), self.critic2_target.forward(sa_next))[:, 0]
        return batch.r + cfg.gamma * (1.0 - batch.done) * q_next

    compute_target = target_values

    def update_critics(self, batch: TransitionBatch, rng: np.random.Generator | None, step: bool = True) -> float:
        """Regress both critics onto the clipped double-Q target.

        Returns ``mse(Q1, y) + mse(Q2, y)`` measured before the step.  With
        ``step=False`` the critics stay fixed but the update counter still
        advances, which is how a frozen critic keeps the actor schedule.
        """
        y = self.target_values(batch, rng)
        sa = np.concatenate([batch.s, batch.a], axis=1)
        loss = 0.0
        for net, opt in ((self.critic1, self.critic1_opt), (self.critic2, self.critic2_opt)):
            part, grads = critic_loss_and_grads(net, sa, y)
            loss += part
            if step:
                adam_step(opt, net.params, grads)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite critic loss after {self.critic_updates} updates")
        self.critic_updates += 1
        return loss

    # -- actor --------------------------------------------------------------
    def dpg_gradients(self, states: np.ndarray) -> tuple[float, list[np.ndarray]]:
        """Mean Q1(s, mu(s)) and the gradient of its negation w.r.t. actor params."""
        n = len(states)
        a, a_cache = self.actor.forward_cached(states)
        q, q_cache = self.critic1.forward_cached(np.concatenate([states, a], axis=1))
        _, dq_dsa = self.critic1.backward(q_cache, np.full((n, 1), -1.0 / n))
        grads, _ = self.actor.backward(a_cache, dq_dsa[:, self.spec.obs_dim :])
        return float(q.mean()), grads

    def update_actor(self, states: np.ndarray) -> float:
        objective, grads = self.dpg_gradients(states)
        adam_step(self.actor_opt, self.actor.params, grads)
        self.actor_updates += 1
        return objective

    def update_targets(self) -> None:
        tau = self.cfg.tau
        soft_update(self.actor_target, self.actor, tau)
        soft_update(self.critic1_target, self.critic1, tau)
        soft_update(self.critic2_target, self.critic2, tau)

    def actor_due(self) -> bool:
        return self.critic_updates % self.cfg.policy_update_freq == 0

    # -- checkpoints --------------------------------------------------------
    NETS = ("actor", "actor_target", "critic1", "critic2", "critic1_target", "critic2_target")

    def save(self, directory, extra: dict | None = None) -> Path:
        """One file per network plus ``manifest.json`` naming roles and bounds."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "obs_dim": self.spec.obs_dim,
            "act_dim": self.spec.act_dim,
            "action_low": self.low.tolist(),
            "action_high": self.high.tolist(),
            "max_episode_steps": self.spec.max_episode_steps,
            "td3": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.cfg).items()},
            "networks": {},
            **(extra or {}),
        }
        for role in self.NETS:
            fname = f"{role}.mlp"
            save_mlp(getattr(self, role), directory / fname)
            manifest["networks"][role] = fname
        path = directory / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, directory) -> "Td3Agent":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
        spec = EnvSpec(
            manifest["obs_dim"],
            manifest["act_dim"],
            np.asarray(manifest["action_low"], dtype=np.float64),
            np.asarray(manifest["action_high"], dtype=np.float64),
            manifest["max_episode_steps"],
        )
        raw = dict(manifest["td3"])
        raw["actor_hidden"] = tuple(raw["actor_hidden"])
        raw["critic_hidden"] = tuple(raw["critic_hidden"])
        agent = cls(spec, Td3Config(**raw), np.random.default_rng(0))
        for role, fname in manifest["networks"].items():
            if role.startswith("actor"):
                net = load_mlp(directory / fname, "tanh", spec.action_low, spec.action_high)
            else:
                net = load_mlp(directory / fname)
            setattr(agent, role, net)
        agent.actor_opt = AdamState.for_params(agent.actor.params, lr=agent.cfg.lr)
        agent.critic1_opt = AdamState.for_params(agent.critic1.params, lr=agent.cfg.lr)
        agent.critic2_opt = AdamState.for_params(agent.critic2.params, lr=agent.cfg.lr)
        return agent
