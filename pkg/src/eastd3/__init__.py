"""TD3 with evolutionary action selection, on small built-in control tasks."""

from .config import TrainConfig, load_config, profile_config
from .eas import PsoConfig, evolve, run_swarm
from .envs import make_env
from .td3 import Td3Agent, Td3Config
from .trainer import run_training

__all__ = [
    "PsoConfig",
    "Td3Agent",
    "Td3Config",
    "TrainConfig",
    "evolve",
    "load_config",
    "make_env",
    "profile_config",
    "run_swarm",
    "run_training",
]
