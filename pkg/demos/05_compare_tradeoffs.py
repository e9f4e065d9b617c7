"""
Comparing trade-off weights
===========================

Median cycles until the smoothed success rate reaches 0.8 for plain
hindsight (1, 1), aggressive hindsight rewards (1, 0.5), and the reversed
weighting (0.5, 2), over three seeds. Runs stop at the threshold, capped at
``--cycles`` (default 200). Also writes an SVG chart of the seed-averaged
curves. Takes a couple of minutes.
"""
import argparse

from archer.harness import (ExperimentConfig, averaged_curve, median_cycles, train_seed,
                            write_svg)

parser = argparse.ArgumentParser()
parser.add_argument("--cycles", type=int, default=200)
parser.add_argument("--svg", default="tradeoffs.svg")
args = parser.parse_args()

base = ExperimentConfig(env="pointgoal", hidden=[64, 64], tau=0.01, actor_lr=1e-3,
                        cycles=args.cycles, seeds=[1, 2, 3])
curves = {}
for lr, lh in [(1.0, 1.0), (1.0, 0.5), (0.5, 2.0)]:
    config = base.replace(lambda_r=lr, lambda_h=lh)
    records = [train_seed(config, s, stop_at_threshold=0.8) for s in config.seeds]
    per_seed = [r.cycles_to_threshold() for r in records]
    print(f"lambda_r={lr}, lambda_h={lh}: per seed {per_seed}, "
          f"median {median_cycles(per_seed)}")
    curves[f"({lr}, {lh})"] = list(averaged_curve(records))

write_svg(args.svg, curves, title="seed-averaged success until the first seed stops")
print(f"wrote {args.svg}")
