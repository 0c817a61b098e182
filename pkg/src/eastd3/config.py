"""Training configuration, profiles, and the ``key = value`` config file format."""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, fields
from pathlib import Path

from .eas import PsoConfig
from .envs import ENV_IDS
from .td3 import Td3Config

ALGOS = ("td3", "eas-td3", "cem-td3")
EVO_MODES = ("sequential", "combined")


@dataclass
class TrainConfig:
    """All run settings.  Defaults are the full-scale profile."""

    env: str = "pendulum"
    algo: str = "eas-td3"
    seed: int = 0
    total_steps: int = 1_000_000
    start_timesteps: int = 25_000
    batch_size: int = 100
    buffer_capacity: int = 1_000_000
    archive_capacity: int = 100_000
    max_episode_steps: int = 200
    f_reward: int = 0
    # TD3
    actor_hidden: tuple[int, ...] = (400, 300)
    critic_hidden: tuple[int, ...] = (400, 300)
    lr: float = 1e-3
    gamma: float = 0.99
    tau: float = 5e-3
    policy_update_freq: int = 2
    exploration_sigma: float = 0.1
    target_noise_sigma: float = 0.2
    target_noise_clip: float = 0.5
    # EAS
    pso_omega: float = 1.2
    pso_c1: float = 1.5
    pso_c2: float = 1.5
    pso_generations: int = 10
    pso_population: int = 10
    pso_v_max: float = 0.1
    pso_init_sigma: float = 1.0
    q_filter_enabled: bool = True
    eas_warmup: typing.Optional[int] = None  # None: start EAS after start_timesteps
    evo_updates: bool = True
    archive_writes: bool = True
    evo_update_mode: str = "sequential"
    freeze_critic_after: typing.Optional[int] = None
    # CEM baseline
    cem_population: int = 10
    cem_elite_frac: float = 0.5
    cem_init_var: float = 1e-3
    cem_var_floor: float = 1e-5
    cem_extra_var: float = 1e-3
    cem_extra_decay: float = 0.95
    # evaluation and logging
    eval_every: int = 5000
    eval_episodes: int = 10
    log_actions: bool = False
    save_checkpoint: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.env not in ENV_IDS:
            raise ValueError(f"unknown env {self.env!r}; choose from {ENV_IDS}")
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algo {self.algo!r}; choose from {ALGOS}")
        if self.evo_update_mode not in EVO_MODES:
            raise ValueError(f"evo_update_mode must be one of {EVO_MODES}")
        positive = (
            "total_steps batch_size buffer_capacity archive_capacity max_episode_steps "
            "eval_every eval_episodes cem_population policy_update_freq pso_population"
        ).split()
        for name in positive:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("start_timesteps", "f_reward", "pso_generations"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.cem_population < 2 and self.algo == "cem-td3":
            raise ValueError("cem-td3 needs cem_population >= 2")
        if not 0.0 < self.cem_elite_frac <= 1.0:
            raise ValueError("cem_elite_frac must lie in (0, 1]")
        # constructing the sub-configs runs their own checks
        self.td3_config()
        self.pso_config()

    def td3_config(self) -> Td3Config:
        return Td3Config(
            actor_hidden=tuple(self.actor_hidden),
            critic_hidden=tuple(self.critic_hidden),
            lr=self.lr,
            gamma=self.gamma,
            tau=self.tau,
            policy_update_freq=self.policy_update_freq,
            exploration_sigma=self.exploration_sigma,
            target_noise_sigma=self.target_noise_sigma,
            target_noise_clip=self.target_noise_clip,
        )

    def pso_config(self) -> PsoConfig:
        return PsoConfig(
            omega=self.pso_omega,
            c1=self.pso_c1,
            c2=self.pso_c2,
            generations=self.pso_generations,
            population=self.pso_population,
            v_max=self.pso_v_max,
            init_sigma=self.pso_init_sigma,
        )

    @property
    def eas_start(self) -> int:
        return self.start_timesteps if self.eas_warmup is None else self.eas_warmup

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


# Settings that make a run fit on one desktop core in minutes.
DESK_PROFILE = dict(
    total_steps=30_000,
    start_timesteps=1_000,
    buffer_capacity=100_000,
    archive_capacity=10_000,
    actor_hidden=(64, 64),
    critic_hidden=(64, 64),
    eval_every=1_000,
    eval_episodes=10,
)

PROFILES = {"full": {}, "desk": DESK_PROFILE}


def profile_config(name: str = "full", **overrides) -> TrainConfig:
    if name not in PROFILES:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    return TrainConfig(**{**PROFILES[name], **overrides})


# -- text format ------------------------------------------------------------
def _field_types() -> dict[str, typing.Any]:
    hints = typing.get_type_hints(TrainConfig)
    return {f.name: hints[f.name] for f in fields(TrainConfig)}


def parse_value(name: str, text: str):
    types = _field_types()
    if name not in types:
        raise KeyError(f"unknown config key {name!r}")
    tp = types[name]
    text = text.strip()
    args = typing.get_args(tp)
    if typing.get_origin(tp) is typing.Union and type(None) in args:
        if text.lower() in ("none", ""):
            return None
        tp = next(a for a in args if a is not type(None))
    if tp is bool:
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"{name}: cannot read {text!r} as a boolean")
    if tp is int:
        return int(float(text)) if ("e" in text.lower() or "." in text) else int(text)
    if tp is float:
        return float(text)
    if typing.get_origin(tp) is tuple:
        return tuple(int(x) for x in text.replace("(", "").replace(")", "").split(",") if x.strip())
    return text


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_lines(text: str) -> dict[str, str]:
    """``key = value`` pairs; ``#`` starts a comment; blank lines ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def config_from_mapping(raw: dict[str, str]) -> TrainConfig:
    raw = dict(raw)
    profile = raw.pop("profile", "full")
    values = {k: parse_value(k, v) for k, v in raw.items()}
    return profile_config(profile, **values)


def load_config(path, overrides: typing.Sequence[str] = ()) -> TrainConfig:
    raw = parse_lines(Path(path).read_text(encoding="utf-8")) if path else {}
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override {item!r} must look like key=value")
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()
    return config_from_mapping(raw)


def dump_config(cfg: TrainConfig) -> str:
    return "".join(f"{f.name} = {format_value(getattr(cfg, f.name))}\n" for f in fields(cfg))
