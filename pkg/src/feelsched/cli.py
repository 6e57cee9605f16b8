"""Command-line entry point: ``feelsched simulate|train|summarize``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiment import ExperimentConfig, emit_outputs, load_config, run_experiment, summarize_csv


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feelsched", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (("simulate", "scheduling and latency only"),
                        ("train", "scheduling plus toy federated training")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value experiment file")
        p.add_argument("--policy", help="mrtp, a_mrtp, of_mrtp, random or round_robin")
        p.add_argument("--seed", type=int)
        p.add_argument("--rounds", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--out", dest="out_dir", help="output directory")
        p.add_argument("--trace", action="store_true", default=None, help="write per-event trace.jsonl")

    p = sub.add_parser("summarize", help="recompute summary statistics from a rounds.csv")
    p.add_argument("csv", help="path to rounds.csv")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "summarize":
            print(json.dumps(summarize_csv(args.csv), sort_keys=True))
            return 0
        config = load_config(args.config) if args.config else ExperimentConfig()
        config = config.replace(policy=args.policy, seed=args.seed, rounds=args.rounds,
                                trials=args.trials, out_dir=args.out_dir, trace=args.trace)
        result = run_experiment(config, train=args.command == "train")
        paths = emit_outputs(result)
    except (ValueError, OSError) as exc:
        print(f"feelsched: error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({**result.summary, "outputs": {k: str(v) for k, v in paths.items()}}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
