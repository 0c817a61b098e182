"""Small deterministic continuous-control tasks and the delayed-reward wrapper.

All three tasks take actions in ``[-1, 1]^act_dim``, never terminate on their
own, and truncate at ``max_episode_steps``.

double-integrator
    state (x, v); x' = x + v*dt, v' = v + a*dt with dt = 0.05;
    reward = -x^2 - 0.1 v^2 - 0.001 a^2 evaluated on the pre-step state.
    Reset: x ~ U(-1, 1), v ~ U(-0.5, 0.5).
pendulum
    angle theta measured from upright, observation (cos, sin, theta_dot).
    Semi-implicit Euler with dt = 0.05, g = 10, m = l = 1, torque = 2a:
    theta_dot' = clip(theta_dot + (3g/2l sin(theta) + 3/(ml^2) torque) dt, +-8),
    theta' = theta + theta_dot' dt.
    reward = -theta^2 - 0.1 theta_dot^2 - 0.001 a^2 on the pre-step state with
    theta wrapped to [-pi, pi).  Reset: theta ~ U(-pi, pi), theta_dot ~ U(-1, 1).
reacher2
    planar point mass, observation (px, py, vx, vy), goal at the origin;
    v' = 0.9 v + a*dt, p' = p + v'*dt with dt = 0.05;
    reward = -||p - goal|| - 0.1 ||v||^2 - 0.001 ||a||^2 on the pre-step state.
    Reset: p ~ U(-1, 1)^2, v = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ENV_IDS = ("double-integrator", "pendulum", "reacher2")


@dataclass(frozen=True)
class EnvSpec:
    obs_dim: int
    act_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    max_episode_steps: int

    def __post_init__(self):
        if self.obs_dim <= 0 or self.act_dim <= 0 or self.max_episode_steps <= 0:
            raise ValueError("EnvSpec dims and max_episode_steps must be positive")
        if self.action_low.shape != (self.act_dim,) or self.action_high.shape != (self.act_dim,):
            raise ValueError("action bounds must have shape (act_dim,)")
        if not np.all(self.action_low < self.action_high):
            raise ValueError("action_low must be < action_high elementwise")


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    done: bool
    truncated: bool


def _unit_bounds(dim: int) -> tuple[np.ndarray, np.ndarray]:
    return -np.ones(dim), np.ones(dim)


class Env:
    """Base class: subclasses implement ``_reset_state`` and ``_advance``."""

    spec: EnvSpec

    def __init__(self, max_episode_steps: int = 200):
        self.steps = 0
        self._rng = np.random.default_rng(0)
        self._max_steps = max_episode_steps

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self.steps = 0
        self._reset_state(self._rng)
        return self._obs()

    def step(self, action) -> StepResult:
        a = np.asarray(action, dtype=np.float64).reshape(self.spec.act_dim)
        if np.any(np.isnan(a)):
            raise ValueError(f"NaN in action {a}")
        a = np.clip(a, self.spec.action_low, self.spec.action_high)
        reward, done = self._advance(a)
        self.steps += 1
        truncated = self.steps >= self.spec.max_episode_steps and not done
        return StepResult(self._obs(), float(reward), bool(done), bool(truncated))

    def _reset_state(self, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def _advance(self, a: np.ndarray) -> tuple[float, bool]:
        raise NotImplementedError

    def _obs(self) -> np.ndarray:
        raise NotImplementedError


class DoubleIntegrator(Env):
    dt = 0.05

    def __init__(self, max_episode_steps: int = 200):
        super().__init__(max_episode_steps)
        low, high = _unit_bounds(1)
        self.spec = EnvSpec(2, 1, low, high, max_episode_steps)
        self.x = 0.0
        self.v = 0.0

    def set_state(self, x: float, v: float) -> None:
        self.x, self.v = float(x), float(v)

    def _reset_state(self, rng):
        self.x = float(rng.uniform(-1.0, 1.0))
        self.v = float(rng.uniform(-0.5, 0.5))

    def _advance(self, a):
        u = float(a[0])
        reward = -self.x**2 - 0.1 * self.v**2 - 0.001 * u**2
        self.x = self.x + self.v * self.dt
        self.v = self.v + u * self.dt
        return reward, False

    def _obs(self):
        return np.array([self.x, self.v])


def angle_normalize(theta: float) -> float:
    return ((theta + math.pi) % (2.0 * math.pi)) - math.pi


class Pendulum(Env):
    dt = 0.05
    g = 10.0
    mass = 1.0
    length = 1.0
    max_speed = 8.0
    max_torque = 2.0

    def __init__(self, max_episode_steps: int = 200):
        super().__init__(max_episode_steps)
        low, high = _unit_bounds(1)
        self.spec = EnvSpec(3, 1, low, high, max_episode_steps)
        self.theta = 0.0
        self.theta_dot = 0.0

    def set_state(self, theta: float, theta_dot: float) -> None:
        self.theta, self.theta_dot = float(theta), float(theta_dot)

    def _reset_state(self, rng):
        self.theta = float(rng.uniform(-math.pi, math.pi))
        self.theta_dot = float(rng.uniform(-1.0, 1.0))

    def _advance(self, a):
        u = float(a[0])
        th = angle_normalize(self.theta)
        reward = -(th**2) - 0.1 * self.theta_dot**2 - 0.001 * u**2
        torque = self.max_torque * u
        acc = 3.0 * self.g / (2.0 * self.length) * math.sin(self.theta)
        acc += 3.0 / (self.mass * self.length**2) * torque
        self.theta_dot = min(max(self.theta_dot + acc * self.dt, -self.max_speed), self.max_speed)
        self.theta = angle_normalize(self.theta + self.theta_dot * self.dt)
        return reward, False

    def _obs(self):
        return np.array([math.cos(self.theta), math.sin(self.theta), self.theta_dot])


class Reacher2(Env):
    dt = 0.05
    damping = 0.9

    def __init__(self, max_episode_steps: int = 200, goal=(0.0, 0.0)):
        super().__init__(max_episode_steps)
        low, high = _unit_bounds(2)
        self.spec = EnvSpec(4, 2, low, high, max_episode_steps)
        self.goal = np.asarray(goal, dtype=np.float64)
        self.pos = np.zeros(2)
        self.vel = np.zeros(2)

    def set_state(self, pos, vel) -> None:
        self.pos = np.asarray(pos, dtype=np.float64).copy()
        self.vel = np.asarray(vel, dtype=np.float64).copy()

    def distance_term(self) -> float:
        return -float(np.linalg.norm(self.pos - self.goal))

    def _reset_state(self, rng):
        self.pos = rng.uniform(-1.0, 1.0, size=2)
        self.vel = np.zeros(2)

    def _advance(self, a):
        reward = self.distance_term() - 0.1 * float(self.vel @ self.vel) - 0.001 * float(a @ a)
        self.vel = self.damping * self.vel + a * self.dt
        self.pos = self.pos + self.vel * self.dt
        return reward, False

    def _obs(self):
        return np.concatenate([self.pos, self.vel])


COARSE_BITS = 20


def _coarsen(x: float) -> float:
    """Round ``x`` to a multiple of ``2**COARSE_BITS`` of its own ulp (exact ops only)."""
    if x == 0.0 or not math.isfinite(x):
        return x
    q = math.ulp(x) * 2.0**COARSE_BITS
    return round(x / q) * q


class DelayedReward:
    """Emit accumulated reward only every ``f_reward`` steps or at episode end.

    Intermediate steps emit 0.0.  A flush emits the chunk sum up to rounding:
    mid-episode flushes bring the running emitted sum to the raw running sum
    snapped to a grid of ``2**COARSE_BITS`` ulps, and the final flush brings it
    exactly onto the raw episode return.  Snapping keeps the final target
    reachable by a single fp64 addition, so step-order sums of wrapped and raw
    rewards agree bit for bit whenever all rewards share a sign (true of every
    built-in env).  Mixed-sign rewards with heavy cancellation can make the
    final target unreachable; the last flush then lands within a few ulps of
    the running sum's largest magnitude.  With ``f_reward = 1`` rewards pass
    through unchanged.
    """

    def __init__(self, env: Env, f_reward: int):
        if f_reward < 1:
            raise ValueError(f"f_reward must be >= 1, got {f_reward}")
        self.env = env
        self.f_reward = int(f_reward)
        self.spec = env.spec
        self._total = 0.0
        self._emitted = 0.0
        self._chunk = 0.0
        self._since_flush = 0

    @property
    def steps(self) -> int:
        return self.env.steps

    def reset(self, seed: int | None = None) -> np.ndarray:
        self._total = 0.0
        self._emitted = 0.0
        self._chunk = 0.0
        self._since_flush = 0
        return self.env.reset(seed)

    def _flush(self, final: bool) -> float:
        out = self._chunk
        self._chunk = 0.0
        if self.f_reward == 1:
            self._emitted += out
            return out
        target = self._total if final else _coarsen(self._total)
        out = target - self._emitted
        for _ in range(8):
            got = self._emitted + out
            if got == target:
                break
            out = math.nextafter(out, math.inf if got < target else -math.inf)
        self._emitted += out
        return out

    def step(self, action) -> StepResult:
        res = self.env.step(action)
        self._total += res.reward
        self._chunk += res.reward
        self._since_flush += 1
        if self._since_flush >= self.f_reward or res.done or res.truncated:
            self._since_flush = 0
            emitted = self._flush(final=res.done or res.truncated)
        else:
            emitted = 0.0
        return StepResult(res.obs, emitted, res.done, res.truncated)


def wrap_delayed(env: Env, f_reward: int) -> DelayedReward:
    return DelayedReward(env, f_reward)


def make_env(env_id: str, f_reward: int = 0, max_episode_steps: int = 200):
    """Build an environment by id; ``f_reward = 0`` leaves rewards undelayed."""
    factories = {"double-integrator": DoubleIntegrator, "pendulum": Pendulum, "reacher2": Reacher2}
    if env_id not in factories:
        raise ValueError(f"unknown env id {env_id!r}; choose from {ENV_IDS}")
    env = factories[env_id](max_episode_steps=max_episode_steps)
    return wrap_delayed(env, f_reward) if f_reward > 0 else env
