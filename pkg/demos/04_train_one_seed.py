"""
Training one seed on PointGoal
==============================

DDPG with final-strategy hindsight on the desk-scale configuration. Each
cycle collects 16 episodes, adds hindsight copies, runs 40 minibatch
updates and then evaluates 20 noise-free episodes. Pass a cycle count as
the first argument (default 150, under twenty seconds).
"""
import sys

from archer.harness import ExperimentConfig, train_seed

cycles = int(sys.argv[1]) if len(sys.argv) > 1 else 150
config = ExperimentConfig(env="pointgoal", hidden=[64, 64], tau=0.01, actor_lr=1e-3,
                          lambda_r=1.0, lambda_h=0.5, cycles=cycles)
record = train_seed(config, seed=1)

smoothed = record.smoothed()
for row, s in zip(record.rows, smoothed):
    if row.cycle % 10 == 0:
        print(f"cycle {row.cycle:3d}  success {row.success_rate:.2f}  smoothed {s:.2f}  "
              f"critic loss {row.critic_loss:.4f}  epsilon {row.epsilon:.4f}")
print(f"cycles to smoothed success 0.8: {record.cycles_to_threshold()}")
