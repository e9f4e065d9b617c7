"""Ring replay buffer and hindsight goal relabeling.

Transitions are kept as stacked arrays (``Transitions``) rather than one
object per tuple; indexing a ``Transitions`` gives back a single
``Transition``. Rewards inside the buffer already carry their trade-off
weight.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import NotReadyError, ShapeError
from .rewards import RewardKind, TradeOff, base_reward, weighted_reward


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    goal: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    is_hindsight: bool = False
    success: bool = False


@dataclass
class Transitions:
    """A column-wise batch of transitions (leading axis = transition index)."""

    state: np.ndarray
    goal: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_state: np.ndarray
    is_hindsight: np.ndarray
    success: np.ndarray

    def __post_init__(self):
        n = len(self.reward)
        for f in fields(self):
            if len(getattr(self, f.name)) != n:
                raise ShapeError(f"column {f.name} has {len(getattr(self, f.name))} rows, "
                                 f"expected {n}")

    def __len__(self) -> int:
        return len(self.reward)

    def __getitem__(self, i: int) -> Transition:
        return Transition(self.state[i], self.goal[i], self.action[i], float(self.reward[i]),
                          self.next_state[i], bool(self.is_hindsight[i]), bool(self.success[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_list(cls, items) -> "Transitions":
        items = list(items)
        return cls(np.array([t.state for t in items], dtype=np.float64),
                   np.array([t.goal for t in items], dtype=np.float64),
                   np.array([t.action for t in items], dtype=np.float64),
                   np.array([t.reward for t in items], dtype=np.float64),
                   np.array([t.next_state for t in items], dtype=np.float64),
                   np.array([t.is_hindsight for t in items], dtype=bool),
                   np.array([t.success for t in items], dtype=bool))

    @classmethod
    def concat(cls, parts) -> "Transitions":
        parts = list(parts)
        return cls(*(np.concatenate([getattr(p, f.name) for p in parts])
                     for f in fields(cls)))


@dataclass
class Episode:
    """One rollout against a fixed goal.

    ``achieved[t]`` is the goal realized in the state reached after
    ``transitions[t]``, i.e. m(s_{t+1}). ``base_rewards`` are the unweighted
    real rewards (transitions hold the weighted ones).
    """

    transitions: Transitions
    achieved: np.ndarray
    base_rewards: np.ndarray

    def __post_init__(self):
        if len(self.achieved) != len(self.transitions):
            raise ShapeError("achieved goals are not aligned with transitions")

    def __len__(self) -> int:
        return len(self.transitions)

    @property
    def goal(self) -> np.ndarray:
        return self.transitions.goal[0]

    @property
    def final_success(self) -> bool:
        return bool(self.transitions.success[-1])


class ReplayBuffer:
    """FIFO ring of transitions with uniform sampling (with replacement)."""

    def __init__(self, capacity: int, state_dim: int, goal_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        self.dims = (state_dim, goal_dim, action_dim)
        self.state = np.zeros((capacity, state_dim))
        self.goal = np.zeros((capacity, goal_dim))
        self.action = np.zeros((capacity, action_dim))
        self.reward = np.zeros(capacity)
        self.next_state = np.zeros((capacity, state_dim))
        self.is_hindsight = np.zeros(capacity, dtype=bool)
        self.success = np.zeros(capacity, dtype=bool)
        self.cursor = 0
        self.size = 0
        self.pushes = 0

    def __len__(self) -> int:
        return self.size

    @property
    def evictions(self) -> int:
        return self.pushes - self.size

    def push(self, transition: Transition) -> None:
        self.extend(Transitions.from_list([transition]))

    def extend(self, batch: Transitions) -> None:
        """Append many transitions in order, overwriting the oldest when full."""
        sd, gd, ad = self.dims
        if batch.state.shape[1:] != (sd,) or batch.next_state.shape[1:] != (sd,) \
                or batch.goal.shape[1:] != (gd,) or batch.action.shape[1:] != (ad,):
            raise ShapeError("transition dimensions do not match the buffer")
        n = len(batch)
        if n == 0:
            return
        if n > self.capacity:
            batch = Transitions(*(getattr(batch, f.name)[n - self.capacity:]
                                  for f in fields(Transitions)))
            self.pushes += n - self.capacity
            self.size = self.capacity
            n = self.capacity
        idx = (self.cursor + np.arange(n)) % self.capacity
        for f in fields(Transitions):
            getattr(self, f.name)[idx] = getattr(batch, f.name)
        self.cursor = (self.cursor + n) % self.capacity
        self.size = min(self.size + n, self.capacity)
        self.pushes += n

    def _ordered_indices(self) -> np.ndarray:
        start = self.cursor if self.size == self.capacity else 0
        return (start + np.arange(self.size)) % self.capacity

    def contents(self) -> Transitions:
        """Everything currently stored, oldest first."""
        idx = self._ordered_indices()
        return self._take(idx)

    def _take(self, idx) -> Transitions:
        return Transitions(*(getattr(self, f.name)[idx] for f in fields(Transitions)))

    def sample_minibatch(self, n: int, rng: np.random.Generator) -> Transitions:
        if self.size == 0:
            raise NotReadyError("cannot sample from an empty replay buffer")
        return self._take(rng.integers(0, self.size, size=n))

    def dump_csv(self, path) -> None:
        sd, gd, ad = self.dims
        header = ([f"state{i}" for i in range(sd)] + [f"goal{i}" for i in range(gd)]
                  + [f"action{i}" for i in range(ad)] + ["reward"]
                  + [f"next_state{i}" for i in range(sd)] + ["is_hindsight"])
        data = self.contents()
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(len(data)):
                w.writerow([repr(float(v)) for v in data.state[i]]
                           + [repr(float(v)) for v in data.goal[i]]
                           + [repr(float(v)) for v in data.action[i]]
                           + [repr(float(data.reward[i]))]
                           + [repr(float(v)) for v in data.next_state[i]]
                           + [int(data.is_hindsight[i])])


def _hindsight(episode: Episode, steps: np.ndarray, goal_steps: np.ndarray, kind,
               tradeoff: TradeOff | None, tolerance: float) -> Transitions:
    src = episode.transitions
    goals = episode.achieved[goal_steps]
    base = base_reward(kind, episode.achieved[steps], goals, tolerance)
    base = np.atleast_1d(np.asarray(base, dtype=np.float64))
    success = np.linalg.norm(episode.achieved[steps] - goals, axis=-1) <= tolerance
    reward = base if tradeoff is None else weighted_reward(tradeoff, True, base)
    return Transitions(src.state[steps].copy(), goals.copy(), src.action[steps].copy(),
                       reward, src.next_state[steps].copy(),
                       np.ones(len(steps), dtype=bool), success)


def relabel_final(episode: Episode, kind, tradeoff: TradeOff, tolerance: float) -> Transitions:
    """One hindsight copy of every step, all aimed at the episode's last achieved goal."""
    T = len(episode)
    steps = np.arange(T)
    return _hindsight(episode, steps, np.full(T, T - 1), RewardKind(kind), tradeoff, tolerance)


def relabel_future(episode: Episode, k: int, kind, tradeoff: TradeOff, tolerance: float,
                   rng: np.random.Generator) -> Transitions:
    """``k`` hindsight copies per step, goals drawn from that step onward.

    For step ``t`` the goal index ``j`` is uniform over ``t..T-1``, so the
    transition's own outcome m(s_{t+1}) is a candidate. Output is ordered
    step-major: rows ``t*k .. t*k+k-1`` belong to step ``t``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    T = len(episode)
    steps = np.repeat(np.arange(T), k)
    goal_steps = rng.integers(steps, T)
    return _hindsight(episode, steps, goal_steps, RewardKind(kind), tradeoff, tolerance)
