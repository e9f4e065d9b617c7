"""
Hindsight relabeling and reward weighting
=========================================

Rolls out one episode with an untrained agent, relabels it with the final
and future strategies, and shows how the trade-off weights scale real and
hindsight rewards.
"""
import numpy as np

from archer import envs
from archer.agent import OuNoise, make_agent
from archer.harness import run_episode
from archer.replay import ReplayBuffer, relabel_final, relabel_future
from archer.rewards import TradeOff, validate_tradeoff

rng = np.random.default_rng(3)
spec = envs.pointgoal_spec()
agent = make_agent(4, 2, 2, rng, hidden=(32, 32))
tradeoff = TradeOff(lambda_r=1.0, lambda_h=0.5)
kind = "binary_negative"
print(f"{tradeoff} with {kind} rewards is classed as {validate_tradeoff(kind, tradeoff).value}")

episode = run_episode(spec, agent, OuNoise.zeros(2, epsilon=1.0), rng, kind, tradeoff,
                      noise_rng=rng)
print(f"real episode: {len(episode)} steps, final success {episode.final_success}, "
      f"real rewards {sorted(set(episode.transitions.reward.tolist()))}")

final = relabel_final(episode, kind, tradeoff, spec.success_tolerance)
print(f"final strategy: {len(final)} copies aimed at {final.goal[0].round(3)}, "
      f"{final.success.sum()} successes, rewards {sorted(set(final.reward.tolist()))}")

future = relabel_future(episode, 4, kind, tradeoff, spec.success_tolerance, rng)
print(f"future strategy (k=4): {len(future)} copies, {future.success.sum()} successes")

# Real and hindsight transitions share one buffer; the flag tells them apart.
buffer = ReplayBuffer(1000, 4, 2, 2)
buffer.extend(episode.transitions)
buffer.extend(final)
batch = buffer.sample_minibatch(256, rng)
print(f"minibatch of 256: {batch.is_hindsight.mean():.2f} hindsight, "
      f"mean reward {batch.reward.mean():.3f}")
