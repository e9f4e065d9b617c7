"""Command line entry point: ``archer run | eval | plot``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import envs
from .agent import load_checkpoint
from .errors import ConfigError
from .harness import ExperimentConfig, evaluate, plot_csv, run_experiment


def _seeds(text: str) -> list[int]:
    """``1,2,3`` or a range ``1..5``."""
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="archer", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train every seed of an experiment")
    run.add_argument("--config", help="JSON file with ExperimentConfig fields")
    run.add_argument("--env", choices=envs.ENV_NAMES)
    run.add_argument("--reward", choices=["binary_negative", "binary_positive", "shaped"])
    run.add_argument("--lambda-r", type=float, dest="lambda_r")
    run.add_argument("--lambda-h", type=float, dest="lambda_h")
    run.add_argument("--strategy", choices=["final", "future", "none"])
    run.add_argument("--k", type=int)
    run.add_argument("--cycles", type=int)
    run.add_argument("--seeds", type=_seeds)
    run.add_argument("--out", dest="output_dir")

    ev = sub.add_parser("eval", help="evaluate a saved agent without noise")
    ev.add_argument("--checkpoint", required=True, help="JSON sidecar written by run")
    ev.add_argument("--episodes", type=int, default=100)
    ev.add_argument("--seed", type=int, default=0)

    pl = sub.add_parser("plot", help="render a result CSV as an SVG line chart")
    pl.add_argument("--in", dest="in_csv", required=True)
    pl.add_argument("--out", dest="out_svg", required=True)
    return p


def _run(args) -> int:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    for key in ("env", "reward", "lambda_r", "lambda_h", "strategy", "k", "cycles", "seeds",
                "output_dir"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    config = ExperimentConfig.from_dict(data)
    result = run_experiment(config)
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    return 0 if any(r.error is None for r in result.records) else 1


def _eval(args) -> int:
    agent, meta = load_checkpoint(args.checkpoint)
    spec = envs.EnvSpec(**meta["env"])
    rate = evaluate(spec, agent, args.episodes, np.random.default_rng(args.seed))
    print(json.dumps({"success_rate": rate, "episodes": args.episodes}))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "eval":
            return _eval(args)
        plot_csv(args.in_csv, args.out_svg)
        return 0
    except (ConfigError, OSError, ValueError) as exc:
        print(f"archer: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
