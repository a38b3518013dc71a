"""Command-line entry point: ``banditlab <subcommand> ...``.

Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure
(including a bound verification that found violations).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from banditlab import boosting
from banditlab.abe import AbeParams
from banditlab.core import GraphFormatError, RandomSource, load_graph
from banditlab.harness import (
    DEFAULT_GRID,
    POLICY_NAMES,
    ExperimentConfig,
    check_report,
    emit,
    emit_sweep,
    make_policy,
    run_experiment,
    run_sweep,
    verify_bounds,
)

log = logging.getLogger("banditlab")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

# numeric policy keys accepted on the command line
POLICY_KEYS = ("eta", "c", "alpha", "C", "gamma", "beta", "delta", "arm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _means(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad means list {text!r}") from None


def _grid(text: str) -> list[tuple[float, float]]:
    grid = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        try:
            c, a = item.split(":")
            grid.append((float(c), float(a)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad grid entry {item!r}, expected c:alpha") from None
    return grid


def _add_experiment_args(p: argparse.ArgumentParser, graph: bool) -> None:
    inst = p.add_mutually_exclusive_group(required=True)
    inst.add_argument("--arms", type=_means, help="comma-separated arm means")
    inst.add_argument("--special-node", type=int, metavar="K",
                      help="K arms of mean 0.5, one random arm of mean 0.75 per replication")
    p.add_argument("--policy", default="abe-graph" if graph else "abe", choices=POLICY_NAMES)
    for key in POLICY_KEYS:
        p.add_argument(f"--{key}", type=int if key == "arm" else float, default=None)
    p.add_argument("--schedule", choices=("constant", "log", "sqrt"), default=None,
                   help="learning-rate schedule of the boltzmann policy")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--reps", type=int, default=10 if graph else 50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoints", type=int, default=100)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--format", choices=("csv", "jsonlines"), default="csv")
    if graph:
        p.add_argument("--graph", type=Path, required=True)
        p.add_argument("--directed", action="store_true")
        p.add_argument("--no-side", action="store_true",
                       help="run bge without side-observation updates")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="banditlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _add_experiment_args(sub.add_parser("simulate", help="replicated regret curve"), graph=False)
    _add_experiment_args(sub.add_parser("graph-sim", help="regret with graph feedback"), graph=True)

    sweep = sub.add_parser("sweep", help="ABE over a (c, alpha) grid with shared rewards")
    _add_experiment_args(sweep, graph=False)
    sweep.add_argument("--grid", type=_grid,
                       default=list(DEFAULT_GRID), help='"c1:a1,c2:a2,..."')

    b = sub.add_parser("boost", help="AdaBoost.MH with bandit-chosen feature subsets")
    b.add_argument("--train", type=Path, required=True)
    b.add_argument("--test", type=Path, required=True)
    b.add_argument("--subsets", type=int, required=True)
    b.add_argument("--policy", default="abe", choices=POLICY_NAMES)
    for key in POLICY_KEYS:
        b.add_argument(f"--{key}", type=int if key == "arm" else float, default=None)
    b.add_argument("--rounds", type=int, required=True)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--weights", choices=("asymmetric", "uniform"), default="asymmetric")
    b.add_argument("--out", type=Path, required=True)

    v = sub.add_parser("verify-bounds", help="check the schedule bounds step by step")
    v.add_argument("--c", type=float, required=True)
    v.add_argument("--alpha", type=float, required=True)
    v.add_argument("--arms", type=int, required=True)
    v.add_argument("--tmax", type=int, required=True)
    v.add_argument("--out", type=Path, default=None, help="JSON report (default: stdout)")
    return parser


def _policy_params(args: argparse.Namespace) -> dict:
    params = {k: getattr(args, k) for k in POLICY_KEYS if getattr(args, k, None) is not None}
    if getattr(args, "schedule", None):
        params["schedule"] = args.schedule
    return params


def _config(args: argparse.Namespace, graph: bool) -> ExperimentConfig:
    params = _policy_params(args)
    fb = None
    graph_path = None
    if graph:
        K = len(args.arms) if args.arms is not None else args.special_node
        with open(args.graph) as fh:
            fb = load_graph(fh, K, directed=args.directed)
        graph_path = str(args.graph)
        if args.policy == "bge":
            params["side"] = not args.no_side
    return ExperimentConfig(
        policy=args.policy,
        horizon=args.horizon,
        means=args.arms,
        special_node=args.special_node,
        policy_params=params,
        graph=fb,
        graph_path=graph_path,
        reps=args.reps,
        seed=args.seed,
        checkpoint_count=args.checkpoints,
    )


def _simulate(args: argparse.Namespace, graph: bool) -> int:
    table = run_experiment(_config(args, graph))
    emit(table, args.format, args.out)
    log.info("wrote %s", args.out)
    return EXIT_OK


def _sweep(args: argparse.Namespace) -> int:
    config = _config(args, graph=False)
    tables = run_sweep(args.grid, config)
    emit_sweep(args.grid, tables, args.format, args.out)
    return EXIT_OK


def _boost(args: argparse.Namespace) -> int:
    train = boosting.load_csv(args.train)
    test = boosting.load_csv(args.test, n_labels=train.L)
    partition = boosting.partition_features(train.d, args.subsets)
    policy = make_policy(args.policy, args.subsets, RandomSource(args.seed), args.rounds,
                         _policy_params(args))
    result = boosting.run_boosting(train, policy, partition, args.rounds, test, args.weights)
    boosting.write_rounds(result.records, args.out)
    return EXIT_OK


def _verify(args: argparse.Namespace) -> int:
    check = verify_bounds(AbeParams(c=args.c, alpha=args.alpha), args.arms, args.tmax)
    text = json.dumps(check_report(check), indent=2, sort_keys=True) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    return EXIT_OK if check.ok else EXIT_RUNTIME


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"banditlab: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            return _simulate(args, graph=False)
        if args.command == "graph-sim":
            return _simulate(args, graph=True)
        if args.command == "sweep":
            return _sweep(args)
        if args.command == "boost":
            return _boost(args)
        return _verify(args)
    except (ValueError, GraphFormatError) as exc:
        print(f"banditlab: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, OverflowError, RuntimeError) as exc:
        print(f"banditlab: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
