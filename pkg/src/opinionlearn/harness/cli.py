"""Command line entry point: ``opinionlearn {run,simulate,metrics}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..graph import read_adjacency_csv, read_edge_list, write_edge_list
from ..dynamics import write_trajectory_csv
from .config import ALGORITHMS, load_config
from .experiment import graph_model, run_experiment
from .metrics import tpr_fpr


def _algos(text: str) -> tuple[str, ...]:
    names = tuple(a.strip() for a in text.split(",") if a.strip())
    bad = [a for a in names if a not in ALGORITHMS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown algorithms {bad}; choose from {','.join(ALGORITHMS)}")
    return names


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opinionlearn", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the ensemble experiment and write CSV tables")
    r.add_argument("--config", type=Path, help="YAML config; defaults apply when omitted")
    r.add_argument("--seed", type=_seed, help="master seed (overrides the config)")
    r.add_argument("--out", type=Path, required=True, help="output directory")
    r.add_argument("--algos", type=_algos, help=f"comma separated subset of {','.join(ALGORITHMS)}")
    r.add_argument("--jobs", type=int, default=1, help="worker processes")

    s = sub.add_parser("simulate", help="sample one model and write its trajectory")
    s.add_argument("--config", type=Path)
    s.add_argument("--seed", type=_seed)
    s.add_argument("--graph", type=int, default=0, help="graph index within the ensemble")
    s.add_argument("--out", type=Path, required=True, help="trajectory CSV")
    s.add_argument("--graph-out", type=Path, help="edge list of the true graph")

    m = sub.add_parser("metrics", help="TPR/FPR of an estimated adjacency against a true graph")
    m.add_argument("--truth", type=Path, required=True, help="edge list file")
    m.add_argument("--estimate", type=Path, required=True, help="adjacency CSV")
    return p


def _config(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_run(args) -> int:
    cfg = replace(_config(args), out=str(args.out))
    if args.algos:
        cfg = replace(cfg, algorithms=args.algos)
    if args.jobs < 1:
        raise SystemExit("--jobs must be positive")
    result = run_experiment(cfg, jobs=args.jobs)
    failed = sum(1 for o in result.outcomes if not o.status.startswith("ok"))
    print(f"{'algorithm':>9} {'T':>3} {'TPR':>6} {'FPR':>6} {'RMSE med':>9}")
    for algo in cfg.algorithms:
        for T in cfg.horizons:
            def get(metric, stat):
                try:
                    return f"{result.stat(algo, T, metric, stat):.3f}"
                except KeyError:
                    return "-"
            print(f"{algo:>9} {T:>3} {get('tpr', 'mean'):>6} {get('fpr', 'mean'):>6} {get('rmse', 'median'):>9}")
    print(f"wrote {args.out / 'runs.csv'} and {args.out / 'summary.csv'}; failed runs: {failed}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    model, traj = graph_model(cfg, args.graph)
    write_trajectory_csv(traj, args.out)
    if args.graph_out:
        write_edge_list(model.graph, args.graph_out)
    print(f"wrote {traj.T + 1} states of {traj.n} agents to {args.out}")
    return 0


def cmd_metrics(args) -> int:
    tpr, fpr = tpr_fpr(read_edge_list(args.truth), read_adjacency_csv(args.estimate))
    print(f"tpr={tpr:.6f} fpr={fpr:.6f}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return {"run": cmd_run, "simulate": cmd_simulate, "metrics": cmd_metrics}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
