"""Goal-conditioned environments with closed-form dynamics.

Two environments share one functional interface (``reset``, ``step``,
``achieved_goal``, ``is_success``):

* ``reacher``: planar 2-link arm. State is ``(q1, q2, v1, v2)``; each action
  component is a relative joint displacement scaled by ``max_displacement``.
  The goal is a reachable point of the workspace annulus.
* ``pointgoal``: a point moving inside the square ``[-w, w]^2``. State is
  ``(x, y, vx, vy)``.

All functions accept a single state or a batch (leading axis) so that several
episodes can be stepped in lockstep.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ShapeError

ENV_NAMES = ("reacher", "pointgoal")


@dataclass(frozen=True)
class EnvSpec:
    name: str = "reacher"
    state_dim: int = 4
    goal_dim: int = 2
    action_dim: int = 2
    l1: float = 0.5
    l2: float = 0.5
    max_displacement: float = 0.1
    success_tolerance: float = 0.05
    episode_length: int = 50
    workspace: float = 1.0  # pointgoal half-width

    def __post_init__(self):
        if self.name not in ENV_NAMES:
            raise ValueError(f"unknown environment {self.name!r}")
        if min(self.state_dim, self.goal_dim, self.action_dim) <= 0:
            raise ValueError("dimensions must be positive")
        if self.success_tolerance <= 0 or self.episode_length <= 0:
            raise ValueError("tolerance and episode length must be positive")
        if self.max_displacement <= 0 or self.l1 <= 0 or self.l2 <= 0 or self.workspace <= 0:
            raise ValueError("geometry values must be positive")


def reacher_spec(**overrides) -> EnvSpec:
    return EnvSpec(name="reacher", **overrides)


def pointgoal_spec(**overrides) -> EnvSpec:
    return EnvSpec(name="pointgoal", **overrides)


@dataclass
class GoalEnvState:
    physical: np.ndarray
    goal: np.ndarray
    step_index: int = 0
    clamped: int = 0  # action components clipped into [-1, 1] so far

    @property
    def batch_shape(self) -> tuple:
        return self.physical.shape[:-1]


def wrap_angle(q):
    """Map angles into (-pi, pi]; values already in range are returned untouched."""
    q = np.asarray(q, dtype=np.float64)
    wrapped = np.pi - np.mod(np.pi - q, 2.0 * np.pi)
    return np.where((q > np.pi) | (q <= -np.pi), wrapped, q)


def reset(spec: EnvSpec, rng: np.random.Generator, n: int | None = None) -> GoalEnvState:
    """Random initial state and reachable goal; ``n`` gives a batch of episodes."""
    shape = () if n is None else (n,)
    if spec.name == "reacher":
        q = rng.uniform(-np.pi, np.pi, size=shape + (2,))
        # area-uniform point in the annulus |l1-l2| <= r <= l1+l2
        r_in, r_out = abs(spec.l1 - spec.l2), spec.l1 + spec.l2
        r = np.sqrt(rng.uniform(r_in ** 2, r_out ** 2, size=shape))
        phi = rng.uniform(-np.pi, np.pi, size=shape)
        goal = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
        physical = np.concatenate([wrap_angle(q), np.zeros(shape + (2,))], axis=-1)
    else:
        w = spec.workspace
        pos = rng.uniform(-w, w, size=shape + (2,))
        goal = rng.uniform(-w, w, size=shape + (2,))
        physical = np.concatenate([pos, np.zeros(shape + (2,))], axis=-1)
    return GoalEnvState(physical, goal, 0, 0)


def step(spec: EnvSpec, state: GoalEnvState, action) -> GoalEnvState:
    action = np.asarray(action, dtype=np.float64)
    if action.shape != state.batch_shape + (spec.action_dim,):
        raise ShapeError(f"action shape {action.shape} does not match state batch "
                         f"{state.batch_shape} x {spec.action_dim}")
    clipped = np.clip(action, -1.0, 1.0)
    n_clamped = int(np.count_nonzero(clipped != action))
    delta = spec.max_displacement * clipped
    pos = state.physical[..., :2]
    if spec.name == "reacher":
        new_pos = wrap_angle(pos + delta)
        vel = delta
    else:
        w = spec.workspace
        new_pos = np.clip(pos + delta, -w, w)
        vel = new_pos - pos
    physical = np.concatenate([new_pos, vel], axis=-1)
    return GoalEnvState(physical, state.goal, state.step_index + 1,
                        state.clamped + n_clamped)


def forward_kinematics(q, l1: float, l2: float) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    q1, q12 = q[..., 0], q[..., 0] + q[..., 1]
    return np.stack([l1 * np.cos(q1) + l2 * np.cos(q12),
                     l1 * np.sin(q1) + l2 * np.sin(q12)], axis=-1)


def achieved_goal(spec: EnvSpec, state: GoalEnvState) -> np.ndarray:
    """The goal realized in ``state``: end-effector position or point position."""
    if spec.name == "reacher":
        return forward_kinematics(state.physical[..., :2], spec.l1, spec.l2)
    return state.physical[..., :2].copy()


def goal_distance(achieved, goal) -> np.ndarray:
    achieved, goal = np.asarray(achieved, np.float64), np.asarray(goal, np.float64)
    if achieved.shape[-1] != goal.shape[-1]:
        raise ShapeError(f"goal dims differ: {achieved.shape} vs {goal.shape}")
    return np.linalg.norm(achieved - goal, axis=-1)


def is_success(spec: EnvSpec, state: GoalEnvState, goal=None):
    """True where the achieved goal lies within the success tolerance of ``goal``."""
    goal = state.goal if goal is None else goal
    return goal_distance(achieved_goal(spec, state), goal) <= spec.success_tolerance


def with_goal(state: GoalEnvState, goal) -> GoalEnvState:
    return replace(state, goal=np.asarray(goal, dtype=np.float64))
