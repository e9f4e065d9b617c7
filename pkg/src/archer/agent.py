"""DDPG actor-critic on goal-conditioned inputs.

The actor sees ``s||g`` and emits a tanh-bounded action; the critic sees
``s||g||a`` and emits a scalar. Target networks track the online ones through
soft updates. Rewards reaching ``train_step`` are already weighted, so the
TD target is plain ``r + gamma * Q'(s', mu'(s'))`` for both real and
hindsight samples.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import NumericError, ShapeError
from .numcore import (AdamState, MlpParams, adam_step, init_mlp, load_params,
                      mlp_backward, mlp_forward, save_params)
from .replay import Transitions

NETWORKS = ("actor", "critic", "target_actor", "target_critic")


@dataclass
class DdpgAgent:
    actor: MlpParams
    critic: MlpParams
    target_actor: MlpParams
    target_critic: MlpParams
    actor_adam: AdamState
    critic_adam: AdamState
    state_dim: int
    goal_dim: int
    action_dim: int
    gamma: float = 0.98
    tau: float = 0.001
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    train_steps: int = 0

    def __post_init__(self):
        obs = self.state_dim + self.goal_dim
        if self.actor.in_dim != obs or self.actor.out_dim != self.action_dim:
            raise ShapeError("actor does not map s||g to an action")
        if self.critic.in_dim != obs + self.action_dim or self.critic.out_dim != 1:
            raise ShapeError("critic does not map s||g||a to a scalar")
        if self.target_actor.shapes != self.actor.shapes or \
                self.target_critic.shapes != self.critic.shapes:
            raise ShapeError("target networks must mirror their online networks")
        if not 0 < self.gamma < 1 or not 0 < self.tau <= 1:
            raise ValueError("need 0 < gamma < 1 and 0 < tau <= 1")


def make_agent(state_dim: int, goal_dim: int, action_dim: int, rng: np.random.Generator,
               hidden: Sequence[int] = (400, 300), **hyper) -> DdpgAgent:
    """Fresh agent; target networks start as exact copies of the online ones."""
    obs = state_dim + goal_dim
    actor = init_mlp([obs, *hidden, action_dim], "tanh", rng)
    critic = init_mlp([obs + action_dim, *hidden, 1], "linear", rng)
    return DdpgAgent(actor, critic, actor.copy(), critic.copy(),
                     AdamState.for_params(actor), AdamState.for_params(critic),
                     state_dim, goal_dim, action_dim, **hyper)


@dataclass
class OuNoise:
    """Ornstein-Uhlenbeck process with mean 0 and dt = 1, scaled by ``epsilon``."""

    state: np.ndarray
    theta: float = 0.15
    sigma: float = 0.2
    epsilon: float = 0.1
    epsilon_decay: float = 0.99

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=np.float64)
        if self.theta < 0 or self.sigma < 0 or self.epsilon < 0:
            raise ValueError("theta, sigma and epsilon must be non-negative")

    @classmethod
    def zeros(cls, shape, **kw) -> "OuNoise":
        return cls(np.zeros(shape), **kw)

    def reset(self) -> None:
        self.state = np.zeros_like(self.state)

    def decay(self) -> None:
        self.epsilon *= self.epsilon_decay


def ou_step(noise: OuNoise, rng: np.random.Generator) -> np.ndarray:
    eta = rng.standard_normal(noise.state.shape)
    noise.state = noise.state + noise.theta * (0.0 - noise.state) + noise.sigma * eta
    return noise.state


def _obs(state, goal) -> np.ndarray:
    return np.concatenate([np.asarray(state, np.float64), np.asarray(goal, np.float64)],
                          axis=-1)


def select_action(agent: DdpgAgent, state, goal, noise: OuNoise | None = None,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Actor output for ``s||g``, plus scaled OU noise when ``noise`` is given."""
    obs = _obs(state, goal)
    if obs.shape[-1] != agent.actor.in_dim:
        raise ShapeError(f"observation width {obs.shape[-1]} != actor input "
                         f"{agent.actor.in_dim}")
    action, _ = mlp_forward(agent.actor, obs)
    if noise is None:
        return action
    if rng is None:
        raise ValueError("noisy action selection needs an rng")
    sample = ou_step(noise, rng)
    return np.clip(action + noise.epsilon * sample, -1.0, 1.0)


def q_value(critic: MlpParams, state, goal, action) -> np.ndarray:
    out, _ = mlp_forward(critic, np.concatenate([_obs(state, goal), action], axis=-1))
    return out[..., 0]


def critic_targets(agent: DdpgAgent, batch: Transitions) -> np.ndarray:
    if len(batch) == 0:
        raise ValueError("empty batch")
    next_obs = _obs(batch.next_state, batch.goal)
    next_action, _ = mlp_forward(agent.target_actor, next_obs)
    q_next, _ = mlp_forward(agent.target_critic, np.concatenate([next_obs, next_action], -1))
    return batch.reward + agent.gamma * q_next[:, 0]


def critic_gradient(agent: DdpgAgent, batch: Transitions, y=None):
    """MSE between Q(s||g, a) and fixed TD targets, with its parameter gradient."""
    n = len(batch)
    if y is None:
        y = critic_targets(agent, batch)
    q, cache = mlp_forward(agent.critic,
                           np.concatenate([_obs(batch.state, batch.goal), batch.action], -1))
    err = q[:, 0] - y
    loss = float(np.mean(err ** 2))
    return loss, mlp_backward(agent.critic, cache, (2.0 / n) * err[:, None])


def critic_update(agent: DdpgAgent, batch: Transitions) -> float:
    loss, grads = critic_gradient(agent, batch)
    if not np.isfinite(loss):
        raise NumericError(f"critic loss is {loss} at train step {agent.train_steps}")
    adam_step(agent.critic, grads, agent.critic_adam, agent.critic_lr)
    return loss


def actor_update(agent: DdpgAgent, batch: Transitions) -> float:
    """Adam step on ``-mean Q(s, mu(s))``; only the actor's parameters move."""
    n = len(batch)
    obs = _obs(batch.state, batch.goal)
    action, a_cache = mlp_forward(agent.actor, obs)
    q_pi, c_cache = mlp_forward(agent.critic, np.concatenate([obs, action], -1))
    loss = -float(np.mean(q_pi))
    if not np.isfinite(loss):
        raise NumericError(f"actor loss is {loss} at train step {agent.train_steps}")
    _, d_input = mlp_backward(agent.critic, c_cache, np.full((n, 1), -1.0 / n),
                              wrt_input=True)
    grads = mlp_backward(agent.actor, a_cache, d_input[:, obs.shape[1]:])
    adam_step(agent.actor, grads, agent.actor_adam, agent.actor_lr)
    return loss


def train_step(agent: DdpgAgent, batch: Transitions) -> tuple[float, float]:
    """One critic and then one actor Adam step on a minibatch.

    Returns the critic MSE and the actor loss ``-mean Q(s, mu(s))``, each
    measured just before its own update.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    critic_loss = critic_update(agent, batch)
    actor_loss = actor_update(agent, batch)
    agent.train_steps += 1
    return critic_loss, actor_loss


def _soft(target: MlpParams, source: MlpParams, tau: float) -> None:
    # tau*theta + (1-tau)*theta' written so that theta' == theta is an exact fixed point
    for t, s in zip(target.arrays(), source.arrays()):
        t += tau * (s - t)


def soft_update(agent: DdpgAgent) -> None:
    _soft(agent.target_critic, agent.critic, agent.tau)
    _soft(agent.target_actor, agent.actor, agent.tau)


def save_checkpoint(agent: DdpgAgent, path, **extra) -> Path:
    """Write ``<stem>.<network>.bin`` snapshots next to a JSON sidecar at ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    files = {}
    for name in NETWORKS:
        fname = f"{path.stem}.{name}.bin"
        save_params(getattr(agent, name), path.parent / fname)
        files[name] = fname
    meta = {
        "state_dim": agent.state_dim, "goal_dim": agent.goal_dim,
        "action_dim": agent.action_dim,
        "gamma": agent.gamma, "tau": agent.tau,
        "actor_lr": agent.actor_lr, "critic_lr": agent.critic_lr,
        "train_steps": agent.train_steps,
        "actor_adam_step": agent.actor_adam.step, "critic_adam_step": agent.critic_adam.step,
        "files": files,
        **extra,
    }
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load_checkpoint(path) -> tuple[DdpgAgent, dict]:
    path = Path(path)
    meta = json.loads(path.read_text())
    nets = {}
    for name in NETWORKS:
        out = "tanh" if name.endswith("actor") else "linear"
        nets[name] = load_params(path.parent / meta["files"][name], output_activation=out)
    actor_adam = AdamState.for_params(nets["actor"], step=meta.get("actor_adam_step", 0))
    critic_adam = AdamState.for_params(nets["critic"], step=meta.get("critic_adam_step", 0))
    agent = DdpgAgent(nets["actor"], nets["critic"], nets["target_actor"],
                      nets["target_critic"], actor_adam, critic_adam,
                      meta["state_dim"], meta["goal_dim"], meta["action_dim"],
                      gamma=meta["gamma"], tau=meta["tau"], actor_lr=meta["actor_lr"],
                      critic_lr=meta["critic_lr"], train_steps=meta.get("train_steps", 0))
    return agent, meta
