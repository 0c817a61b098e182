"""Evolutionary action selection: particle swarm search over actions, scored by a critic.

An evaluator maps ``(state, actions)`` with ``actions`` of shape ``(N, D)`` to a
fitness vector of shape ``(N,)``.  Particle 0 starts at the policy action
itself, so the returned global best never scores below it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .tensor import Mlp

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class PsoConfig:
    omega: float = 1.2
    c1: float = 1.5
    c2: float = 1.5
    generations: int = 10
    population: int = 10
    v_max: float = 0.1
    init_sigma: float = 1.0

    def __post_init__(self):
        if self.population < 1:
            raise ValueError(f"population must be >= 1, got {self.population}")
        if self.generations < 0:
            raise ValueError(f"generations must be >= 0, got {self.generations}")
        if np.any(np.asarray(self.v_max) <= 0):
            raise ValueError("v_max must be positive")
        if self.init_sigma < 0 or self.omega < 0 or self.c1 < 0 or self.c2 < 0:
            raise ValueError("omega, c1, c2 and init_sigma must be non-negative")


@dataclass
class ActionPopulation:
    positions: np.ndarray
    velocities: np.ndarray
    pbest: np.ndarray
    pbest_fitness: np.ndarray
    gbest: np.ndarray | None = None
    gbest_fitness: float = -np.inf
    fitness: np.ndarray | None = None
    seed_fitness: float | None = None
    # global-best fitness after every evaluation, in order
    history: list[float] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.positions)


def init_population(a, cfg: PsoConfig, bounds, rng: np.random.Generator) -> ActionPopulation:
    low, high = bounds
    a = np.asarray(a, dtype=np.float64)
    if cfg.population < 1:
        raise ValueError("population must be >= 1")
    if np.any(a < low) or np.any(a > high):
        raise ValueError(f"seed action {a} outside bounds")
    n, d = cfg.population, a.shape[0]
    positions = np.empty((n, d))
    positions[0] = a
    if n > 1:
        noise = rng.normal(0.0, cfg.init_sigma, size=(n - 1, d)) if cfg.init_sigma > 0 else np.zeros((n - 1, d))
        positions[1:] = np.clip(a + noise, low, high)
    v_max = np.broadcast_to(np.asarray(cfg.v_max, dtype=np.float64), (d,))
    velocities = rng.uniform(-v_max, v_max, size=(n, d))
    return ActionPopulation(
        positions=positions,
        velocities=velocities,
        pbest=positions.copy(),
        pbest_fitness=np.full(n, -np.inf),
    )


def evaluate_fitness(pop: ActionPopulation, s, evaluator: Evaluator) -> np.ndarray:
    """Score every particle, then refresh personal and global bests (strict >)."""
    fitness = np.asarray(evaluator(s, pop.positions), dtype=np.float64).reshape(pop.size)
    if not np.all(np.isfinite(fitness)):
        raise FloatingPointError(f"non-finite fitness {fitness}")
    if pop.seed_fitness is None:
        pop.seed_fitness = float(fitness[0])
    improved = fitness > pop.pbest_fitness
    pop.pbest[improved] = pop.positions[improved]
    pop.pbest_fitness[improved] = fitness[improved]
    # argmax picks the first maximum, matching an in-order scan with strict >
    best = int(np.argmax(pop.pbest_fitness))
    if pop.pbest_fitness[best] > pop.gbest_fitness:
        pop.gbest = pop.pbest[best].copy()
        pop.gbest_fitness = float(pop.pbest_fitness[best])
    pop.fitness = fitness
    pop.history.append(pop.gbest_fitness)
    return fitness


def update_velocity(pop: ActionPopulation, cfg: PsoConfig, rng: np.random.Generator, r1=None, r2=None) -> None:
    """Inertia plus attraction to personal and global bests, clamped to +-v_max.

    ``r1`` and ``r2`` are drawn per particle and per dimension unless given.
    """
    if pop.gbest is None:
        raise RuntimeError("evaluate the population before updating velocities")
    shape = pop.positions.shape
    r1 = rng.random(shape) if r1 is None else r1
    r2 = rng.random(shape) if r2 is None else r2
    v = (
        cfg.omega * pop.velocities
        + cfg.c1 * r1 * (pop.pbest - pop.positions)
        + cfg.c2 * r2 * (pop.gbest - pop.positions)
    )
    v_max = np.asarray(cfg.v_max, dtype=np.float64)
    pop.velocities = np.clip(v, -v_max, v_max)


def update_positions(pop: ActionPopulation, bounds) -> None:
    low, high = bounds
    pop.positions = np.clip(pop.positions + pop.velocities, low, high)


def run_swarm(s, a, cfg: PsoConfig, evaluator: Evaluator, bounds, rng: np.random.Generator) -> ActionPopulation:
    """Full search; the final generation gets one extra evaluation."""
    pop = init_population(a, cfg, bounds, rng)
    for _ in range(cfg.generations):
        evaluate_fitness(pop, s, evaluator)
        update_velocity(pop, cfg, rng)
        update_positions(pop, bounds)
    evaluate_fitness(pop, s, evaluator)
    return pop


def evolve(s, a, cfg: PsoConfig, evaluator: Evaluator, bounds, rng: np.random.Generator) -> np.ndarray:
    return run_swarm(s, a, cfg, evaluator, bounds, rng).gbest


def critic_evaluator(critic: Mlp) -> Evaluator:
    """Fitness = critic output on ``[state, action]`` for each particle.

    Uses the batch-invariant forward so a particle's score does not depend on
    the rest of the swarm; re-scoring the returned action reproduces its fitness.
    """

    def evaluate(s, actions):
        actions = np.atleast_2d(actions)
        states = np.broadcast_to(np.asarray(s, dtype=np.float64), (len(actions), len(s)))
        return critic.forward(np.concatenate([states, actions], axis=1), batch_invariant=True)[:, 0]

    return evaluate


def pointwise(fn: Callable[[np.ndarray, np.ndarray], float]) -> Evaluator:
    """Lift a scalar ``fn(s, a)`` to a batch evaluator."""

    def evaluate(s, actions):
        return np.array([fn(s, a) for a in np.atleast_2d(actions)], dtype=np.float64)

    return evaluate
