"""Training loop, evaluation and experiment artifacts.

One cycle = ``episodes_per_cycle`` rollouts (each stored with its hindsight
copies) followed by ``opt_steps_per_cycle`` minibatch updates, a soft target
update after every one of them, and one decay of the exploration scale.
A noise-free evaluation follows every cycle.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import envs
from .agent import (DdpgAgent, OuNoise, make_agent, save_checkpoint, select_action,
                    soft_update, train_step)
from .envs import EnvSpec
from .errors import ConfigError
from .replay import Episode, ReplayBuffer, Transitions, relabel_final, relabel_future
from .rewards import RewardKind, TradeOff, base_reward, validate_tradeoff, weighted_reward

log = logging.getLogger(__name__)

STRATEGIES = ("final", "future", "none")
CSV_HEADER = "cycle,success_rate,critic_loss,mean_return,epsilon"
THRESHOLD = 0.8
SMOOTH_WINDOW = 50


@dataclass
class ExperimentConfig:
    env: str = "reacher"
    reward: str = "binary_negative"
    lambda_r: float = 1.0
    lambda_h: float = 1.0
    strategy: str = "final"
    k: int = 4
    cycles: int = 300
    episodes_per_cycle: int = 16
    opt_steps_per_cycle: int = 40
    batch_size: int = 128
    buffer_capacity: int = 100_000
    gamma: float = 0.98
    tau: float = 0.001
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    epsilon: float = 0.1
    epsilon_decay: float = 0.99
    seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    tolerance: float = 0.05
    episode_length: int = 50
    l1: float = 0.5
    l2: float = 0.5
    max_displacement: float = 0.1
    workspace: float = 1.0
    hidden: list = field(default_factory=lambda: [400, 300])
    eval_episodes: int = 20
    output_dir: str = "runs/experiment"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.env not in envs.ENV_NAMES:
            raise ConfigError(f"env must be one of {envs.ENV_NAMES}, got {self.env!r}")
        try:
            RewardKind(self.reward)
        except ValueError:
            raise ConfigError(f"unknown reward {self.reward!r}") from None
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        counts = ("k", "cycles", "episodes_per_cycle", "opt_steps_per_cycle", "batch_size",
                  "buffer_capacity", "episode_length", "eval_episodes")
        for name in counts:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}")
        if not self.seeds or not all(isinstance(s, int) and not isinstance(s, bool)
                                     for s in self.seeds):
            raise ConfigError("seeds must be a non-empty list of integers")
        if not self.hidden or not all(isinstance(h, int) and h >= 1 for h in self.hidden):
            raise ConfigError("hidden must list positive layer widths")
        if not 0 < self.gamma < 1 or not 0 < self.tau <= 1:
            raise ConfigError("need 0 < gamma < 1 and 0 < tau <= 1")
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ConfigError("learning rates must be positive")
        if self.epsilon < 0 or not 0 < self.epsilon_decay <= 1:
            raise ConfigError("need epsilon >= 0 and 0 < epsilon_decay <= 1")
        self.tradeoff  # raises ConfigError on non-positive weights
        try:
            self.env_spec()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def reward_kind(self) -> RewardKind:
        return RewardKind(self.reward)

    @property
    def tradeoff(self) -> TradeOff:
        return TradeOff(float(self.lambda_r), float(self.lambda_h))

    def env_spec(self) -> EnvSpec:
        return EnvSpec(name=self.env, l1=self.l1, l2=self.l2,
                       max_displacement=self.max_displacement,
                       success_tolerance=self.tolerance, episode_length=self.episode_length,
                       workspace=self.workspace)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        """Hash of every training-relevant field (``output_dir`` excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


@dataclass
class SeedStreams:
    """Independent generators so toggling one feature cannot shift another's draws."""

    env: np.random.Generator
    noise: np.random.Generator
    buffer: np.random.Generator
    init: np.random.Generator
    eval: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "SeedStreams":
        children = np.random.SeedSequence(seed).spawn(5)
        return cls(*(np.random.default_rng(c) for c in children))


# ---------------------------------------------------------------------------
# rollouts


def run_episodes(spec: EnvSpec, agent: DdpgAgent, n: int, rng: np.random.Generator,
                 noise: OuNoise | None = None, noise_rng: np.random.Generator | None = None,
                 kind=RewardKind.BINARY_NEGATIVE, tradeoff: TradeOff | None = TradeOff()):
    """Roll out ``n`` episodes in lockstep; returns one ``Episode`` per rollout.

    Real rewards are multiplied by ``tradeoff.lambda_r``; ``tradeoff=None``
    stores them unweighted.
    """
    kind = RewardKind(kind)
    T = spec.episode_length
    state = envs.reset(spec, rng, n)
    if noise is not None:
        noise.state = np.zeros((n, spec.action_dim))
    states = np.empty((T, n, spec.state_dim))
    next_states = np.empty((T, n, spec.state_dim))
    actions = np.empty((T, n, spec.action_dim))
    achieved = np.empty((T, n, spec.goal_dim))
    for t in range(T):
        states[t] = state.physical
        a = select_action(agent, state.physical, state.goal, noise,
                          noise_rng if noise_rng is not None else rng)
        actions[t] = a
        state = envs.step(spec, state, a)
        next_states[t] = state.physical
        achieved[t] = envs.achieved_goal(spec, state)

    goal = np.broadcast_to(state.goal, (T, n, spec.goal_dim))
    base = np.asarray(base_reward(kind, achieved, goal, spec.success_tolerance))
    success = envs.goal_distance(achieved, goal) <= spec.success_tolerance
    stored = base if tradeoff is None else weighted_reward(tradeoff, False, base)
    episodes = []
    for i in range(n):
        tr = Transitions(states[:, i].copy(), goal[:, i].copy(), actions[:, i].copy(),
                         np.array(stored[:, i]), next_states[:, i].copy(),
                         np.zeros(T, dtype=bool), success[:, i].copy())
        episodes.append(Episode(tr, achieved[:, i].copy(), base[:, i].copy()))
    return episodes


def run_episode(spec: EnvSpec, agent: DdpgAgent, noise: OuNoise | None,
                rng: np.random.Generator, kind=RewardKind.BINARY_NEGATIVE,
                tradeoff: TradeOff | None = TradeOff(),
                noise_rng: np.random.Generator | None = None) -> Episode:
    return run_episodes(spec, agent, 1, rng, noise, noise_rng, kind, tradeoff)[0]


def store_with_hindsight(buffer: ReplayBuffer, episode: Episode, strategy: str, k: int,
                         kind, tradeoff: TradeOff | None, tolerance: float,
                         rng: np.random.Generator) -> tuple[int, int]:
    """Push the real transitions and their relabeled copies; returns both counts."""
    buffer.extend(episode.transitions)
    if strategy == "final":
        extra = relabel_final(episode, kind, tradeoff, tolerance)
    elif strategy == "future":
        if k < 1:
            raise ConfigError("future strategy needs k >= 1")
        extra = relabel_future(episode, k, kind, tradeoff, tolerance, rng)
    elif strategy == "none":
        return len(episode), 0
    else:
        raise ConfigError(f"unknown strategy {strategy!r}")
    buffer.extend(extra)
    return len(episode), len(extra)


def evaluate(spec: EnvSpec, agent: DdpgAgent, n_episodes: int, rng: np.random.Generator,
             policy=None) -> float:
    """Fraction of noise-free episodes that end within tolerance of their goal.

    ``policy(state, goal) -> action`` overrides the actor when given.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    state = envs.reset(spec, rng, n_episodes)
    for _ in range(spec.episode_length):
        if policy is None:
            a = select_action(agent, state.physical, state.goal)
        else:
            a = policy(state.physical, state.goal)
        state = envs.step(spec, state, a)
    return float(np.mean(envs.is_success(spec, state)))


def smooth(series: Sequence[float], window: int = SMOOTH_WINDOW) -> np.ndarray:
    """Trailing moving average; early entries average over what is available."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        return x
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(0, idx - window)
    return (csum[idx] - csum[lo]) / (idx - lo)


# ---------------------------------------------------------------------------
# training


@dataclass
class CycleStats:
    critic_loss: float
    actor_loss: float
    mean_return: float
    epsilon: float
    real_pushed: int
    hindsight_pushed: int


@dataclass
class CycleRow:
    cycle: int
    success_rate: float
    critic_loss: float
    mean_return: float
    epsilon: float


@dataclass
class RunRecord:
    seed: int
    rows: list = field(default_factory=list)
    error: str | None = None

    @property
    def success(self) -> np.ndarray:
        return np.array([r.success_rate for r in self.rows])

    def smoothed(self, window: int = SMOOTH_WINDOW) -> np.ndarray:
        return smooth(self.success, window)

    def cycles_to_threshold(self, threshold: float = THRESHOLD, window: int = SMOOTH_WINDOW):
        return cycles_to_threshold(self.smoothed(window), threshold)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for r in self.rows:
            buf.write(f"{r.cycle},{r.success_rate!r},{r.critic_loss!r},"
                      f"{r.mean_return!r},{r.epsilon!r}\n")
        return buf.getvalue()


def cycles_to_threshold(smoothed: Sequence[float], threshold: float = THRESHOLD):
    """1-based index of the first cycle at or above ``threshold``, else ``"never"``."""
    hits = np.nonzero(np.asarray(smoothed) >= threshold)[0]
    return int(hits[0]) + 1 if hits.size else "never"


def median_cycles(values) -> int | float | str:
    """Median with ``"never"`` ranked above every finite count."""
    finite = [math.inf if v == "never" else v for v in values]
    med = statistics.median(finite)
    if math.isinf(med):
        return "never"
    return int(med) if float(med).is_integer() else float(med)


@dataclass
class Trainer:
    """Mutable state of one seed's training run."""

    config: ExperimentConfig
    spec: EnvSpec
    agent: DdpgAgent
    buffer: ReplayBuffer
    streams: SeedStreams
    epsilon: float
    apply_weights: bool = True

    @classmethod
    def create(cls, config: ExperimentConfig, seed: int, apply_weights: bool = True):
        spec = config.env_spec()
        streams = SeedStreams.from_seed(seed)
        agent = make_agent(spec.state_dim, spec.goal_dim, spec.action_dim, streams.init,
                           hidden=config.hidden, gamma=config.gamma, tau=config.tau,
                           actor_lr=config.actor_lr, critic_lr=config.critic_lr)
        buffer = ReplayBuffer(config.buffer_capacity, spec.state_dim, spec.goal_dim,
                              spec.action_dim)
        if apply_weights:
            validate_tradeoff(config.reward_kind, config.tradeoff)
        return cls(config, spec, agent, buffer, streams, config.epsilon, apply_weights)

    @property
    def weights(self) -> TradeOff | None:
        return self.config.tradeoff if self.apply_weights else None


def run_cycle(trainer: Trainer) -> CycleStats:
    cfg, spec = trainer.config, trainer.spec
    noise = OuNoise.zeros((cfg.episodes_per_cycle, spec.action_dim), epsilon=trainer.epsilon,
                          epsilon_decay=cfg.epsilon_decay)
    episodes = run_episodes(spec, trainer.agent, cfg.episodes_per_cycle, trainer.streams.env,
                            noise, trainer.streams.noise, cfg.reward_kind, trainer.weights)
    real = hindsight = 0
    for ep in episodes:
        r, h = store_with_hindsight(trainer.buffer, ep, cfg.strategy, cfg.k, cfg.reward_kind,
                                    trainer.weights, spec.success_tolerance,
                                    trainer.streams.buffer)
        real += r
        hindsight += h
    critic_losses, actor_losses = [], []
    for _ in range(cfg.opt_steps_per_cycle):
        batch = trainer.buffer.sample_minibatch(cfg.batch_size, trainer.streams.buffer)
        c, a = train_step(trainer.agent, batch)
        soft_update(trainer.agent)
        critic_losses.append(c)
        actor_losses.append(a)
    trainer.epsilon *= cfg.epsilon_decay
    mean_return = float(np.mean([ep.base_rewards.sum() for ep in episodes]))
    return CycleStats(float(np.mean(critic_losses)), float(np.mean(actor_losses)),
                      mean_return, trainer.epsilon, real, hindsight)


def train_seed(config: ExperimentConfig, seed: int, *, apply_weights: bool = True,
               stop_at_threshold: float | None = None, checkpoint=None) -> RunRecord:
    """Train one seed for ``config.cycles`` cycles, evaluating after each.

    ``stop_at_threshold`` ends the run early once the smoothed success rate
    reaches it; rows up to that cycle are identical to a full run.
    """
    trainer = Trainer.create(config, seed, apply_weights)
    record = RunRecord(seed)
    for cycle in range(1, config.cycles + 1):
        try:
            stats = run_cycle(trainer)
        except ArithmeticError as exc:
            raise type(exc)(f"seed {seed}, cycle {cycle}: {exc}") from exc
        rate = evaluate(trainer.spec, trainer.agent, config.eval_episodes,
                        trainer.streams.eval)
        record.rows.append(CycleRow(cycle, rate, stats.critic_loss, stats.mean_return,
                                    stats.epsilon))
        log.debug("seed %d cycle %d success %.3f loss %.4f", seed, cycle, rate,
                  stats.critic_loss)
        if stop_at_threshold is not None and \
                record.smoothed()[-1] >= stop_at_threshold:
            break
    if checkpoint is not None:
        save_checkpoint(trainer.agent, checkpoint, epsilon=trainer.epsilon, seed=seed,
                        env=dataclasses.asdict(trainer.spec), cycles=len(record.rows))
    return record


# ---------------------------------------------------------------------------
# experiments and artifacts


@dataclass
class ExperimentResult:
    records: list
    summary: dict
    averaged: np.ndarray


def averaged_curve(records: Sequence[RunRecord], window: int = SMOOTH_WINDOW) -> np.ndarray:
    """Seed-mean success per cycle (runs truncated to the shortest one)."""
    ok = [r for r in records if r.error is None and r.rows]
    if not ok:
        return np.zeros(0)
    n = min(len(r.rows) for r in ok)
    return np.mean([r.success[:n] for r in ok], axis=0)


def median_smoothed_curve(records: Sequence[RunRecord],
                          window: int = SMOOTH_WINDOW) -> np.ndarray:
    ok = [r for r in records if r.error is None and r.rows]
    n = min(len(r.rows) for r in ok)
    return np.median([r.smoothed(window)[:n] for r in ok], axis=0)


def summarize(config: ExperimentConfig, records: Sequence[RunRecord],
              threshold: float = THRESHOLD) -> dict:
    per_seed = {str(r.seed): (r.cycles_to_threshold(threshold) if r.error is None else "error")
                for r in records}
    valid = [v for v in per_seed.values() if v != "error"]
    return {
        "median_cycles_to_threshold": median_cycles(valid) if valid else "never",
        "per_seed_cycles": per_seed,
        "threshold": threshold,
        "config_digest": config.digest(),
    }


def run_experiment(config: ExperimentConfig, out_dir=None, *, apply_weights: bool = True,
                   write: bool = True) -> ExperimentResult:
    """Train every seed in ``config.seeds`` and write CSV/SVG/JSON artifacts."""
    out = Path(out_dir if out_dir is not None else config.output_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
    records = []
    for seed in config.seeds:
        ckpt = out / "checkpoints" / f"seed_{seed}.json" if write else None
        try:
            rec = train_seed(config, seed, apply_weights=apply_weights, checkpoint=ckpt)
        except Exception as exc:  # one bad seed must not sink the others
            log.error("seed %d failed: %s", seed, exc)
            rec = RunRecord(seed, error=f"{type(exc).__name__}: {exc}")
        records.append(rec)
        if write and rec.error is None:
            (out / f"seed_{seed}.csv").write_text(rec.to_csv())

    mean = averaged_curve(records)
    summary = summarize(config, records)
    if write:
        smoothed = smooth(mean)
        lines = ["cycle,mean_success_rate,smoothed_success_rate"]
        lines += [f"{i + 1},{float(m)!r},{float(s)!r}"
                  for i, (m, s) in enumerate(zip(mean, smoothed))]
        (out / "averaged.csv").write_text("\n".join(lines) + "\n")
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
        write_svg(out / "success.svg",
                  {"mean success": mean, f"smoothed ({SMOOTH_WINDOW})": smoothed},
                  title=f"{config.env} / {config.reward} / "
                        f"lambda_r={config.lambda_r} lambda_h={config.lambda_h}")
        errors = {str(r.seed): r.error for r in records if r.error is not None}
        if errors:
            (out / "errors.json").write_text(json.dumps(errors, indent=2) + "\n")
    return ExperimentResult(records, summary, mean)


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f")


def svg_chart(series: dict, title: str = "", ylabel: str = "success rate",
              width: int = 640, height: int = 400) -> str:
    """Line chart of each series against its 1-based index, y fixed to [0, 1]."""
    left, right, top, bottom = 60, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom
    n = max((len(v) for v in series.values()), default=1)
    xmax = max(n, 2)

    def px(i):
        return left + pw * (i - 1) / (xmax - 1)

    def py(v):
        return top + ph * (1.0 - min(max(v, 0.0), 1.0))

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">'
             f'{_escape(title)}</text>',
             f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
             f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>']
    for tick in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0):
        y = py(tick)
        parts.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end" '
                     f'font-size="11">{tick:.1f}</text>')
        parts.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + pw}" y2="{y:.1f}" '
                     f'stroke="#ddd"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        c = 1 + round(frac * (xmax - 1))
        parts.append(f'<text x="{px(c):.1f}" y="{top + ph + 18}" text-anchor="middle" '
                     f'font-size="11">{c}</text>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" '
                 f'font-size="12">cycle</text>')
    parts.append(f'<text x="15" y="{top + ph / 2:.1f}" font-size="12" '
                 f'transform="rotate(-90 15 {top + ph / 2:.1f})" text-anchor="middle">'
                 f'{_escape(ylabel)}</text>')
    for j, (label, values) in enumerate(series.items()):
        color = _COLORS[j % len(_COLORS)]
        pts = " ".join(f"{px(i + 1):.2f},{py(float(v)):.2f}" for i, v in enumerate(values))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{pts}"/>')
        parts.append(f'<text x="{left + 10}" y="{top + 15 + 15 * j}" font-size="11" '
                     f'fill="{color}">{_escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(path, series: dict, **kw) -> None:
    Path(path).write_text(svg_chart(series, **kw))


def plot_csv(in_csv, out_svg) -> None:
    """Chart every non-``cycle`` column of a CSV produced by this module."""
    with open(in_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{in_csv} has no data rows")
    cols = [c for c in rows[0] if c != "cycle"]
    if "success_rate" in cols:  # per-seed file: only rates fit the [0, 1] axis
        cols = ["success_rate"]
    series = {c: [float(r[c]) for r in rows] for c in cols}
    write_svg(out_svg, series, title=Path(in_csv).name)
