"""Fixed-capacity FIFO stores with uniform sampling (with replacement)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Generic, TypeVar

import numpy as np

T = TypeVar("T")


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool


@dataclass(frozen=True)
class StateActionPair:
    s: np.ndarray
    a_evo: np.ndarray


class RingStore(Generic[T]):
    """Ring buffer of arbitrary items; the oldest item is overwritten first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self.cursor = 0
        self.size = 0
        self._items: list[Any] = [None] * self.capacity

    def __len__(self) -> int:
        return self.size

    def _advance(self) -> int:
        slot = self.cursor
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        return slot

    def push(self, item: T) -> None:
        self._items[self._advance()] = item

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise IndexError("cannot sample from an empty store")
        if n < 1:
            raise ValueError(f"batch size must be positive, got {n}")
        return rng.integers(0, self.size, size=n)

    def sample_batch(self, n: int, rng: np.random.Generator) -> list[T]:
        return [self._items[i] for i in self.sample_indices(n, rng)]

    def contents(self) -> list[T]:
        """Stored items, oldest first."""
        if self.size < self.capacity:
            return list(self._items[: self.size])
        return self._items[self.cursor :] + self._items[: self.cursor]


@dataclass
class TransitionBatch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    done: np.ndarray

    def __len__(self) -> int:
        return len(self.r)


class ReplayBuffer(RingStore[Transition]):
    """Transition ring backed by preallocated column arrays."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        super().__init__(capacity)
        self._items = []
        self.s = np.zeros((self.capacity, obs_dim))
        self.a = np.zeros((self.capacity, act_dim))
        self.r = np.zeros(self.capacity)
        self.s_next = np.zeros((self.capacity, obs_dim))
        self.done = np.zeros(self.capacity)

    def push(self, item: Transition) -> None:
        if not np.isfinite(item.r):
            raise ValueError(f"non-finite reward {item.r}")
        i = self._advance()
        self.s[i] = item.s
        self.a[i] = item.a
        self.r[i] = item.r
        self.s_next[i] = item.s_next
        self.done[i] = float(item.done)

    def _get(self, i: int) -> Transition:
        return Transition(self.s[i].copy(), self.a[i].copy(), float(self.r[i]), self.s_next[i].copy(), bool(self.done[i]))

    def sample_batch(self, n, rng):
        return [self._get(i) for i in self.sample_indices(n, rng)]

    def sample(self, n: int, rng: np.random.Generator) -> TransitionBatch:
        idx = self.sample_indices(n, rng)
        return TransitionBatch(self.s[idx], self.a[idx], self.r[idx], self.s_next[idx], self.done[idx])

    def contents(self):
        order = range(self.size) if self.size < self.capacity else [
            (self.cursor + k) % self.capacity for k in range(self.capacity)
        ]
        return [self._get(i) for i in order]


class Archive(RingStore[StateActionPair]):
    """Archive of (state, evolutionary action) pairs backed by column arrays."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        super().__init__(capacity)
        self._items = []
        self.s = np.zeros((self.capacity, obs_dim))
        self.a_evo = np.zeros((self.capacity, act_dim))

    def push(self, item: StateActionPair) -> None:
        i = self._advance()
        self.s[i] = item.s
        self.a_evo[i] = item.a_evo

    def sample_batch(self, n, rng):
        return [StateActionPair(self.s[i].copy(), self.a_evo[i].copy()) for i in self.sample_indices(n, rng)]

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        idx = self.sample_indices(n, rng)
        return self.s[idx], self.a_evo[idx]

    def contents(self):
        order = range(self.size) if self.size < self.capacity else [
            (self.cursor + k) % self.capacity for k in range(self.capacity)
        ]
        return [StateActionPair(self.s[i].copy(), self.a_evo[i].copy()) for i in order]
