"""Ensemble experiment: random mixed models, every algorithm, every horizon.

One trajectory of the longest horizon is simulated per graph and shorter
horizons use its prefixes. Every (graph, horizon, algorithm) run draws its
randomness from a seed derived from the master seed and its own indices, so
results do not depend on scheduling or on the number of worker processes.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from ..bandit import BanditRun, JointEstimate, random_search_config, run_bandit
from ..baselines import GPRBaseline, fit_linear
from ..dynamics import ALL_RULES, MixedModel, Trajectory, sample_model, simulate, write_trajectory_csv
from ..graph import write_adjacency_csv, write_edge_list
from .config import ALGORITHMS, ExperimentConfig, dump_config
from .metrics import prediction_rmse, rule_accuracy, tpr_fpr

log = logging.getLogger(__name__)

_MODEL, _EVAL, _ALGO = 0, 1, 2
RUN_FIELDS = ("graph", "T", "algorithm", "metric", "value", "status")
SUMMARY_FIELDS = ("algorithm", "T", "metric", "stat", "value", "count")
ACC_METRICS = {rule: f"acc_{rule.name}" for rule in ALL_RULES}


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _run_seed(seed: int, g: int, T: int, algo: str) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(g, T, _ALGO, ALGORITHMS.index(algo)))
    return int(ss.generate_state(1, np.uint64)[0])


def graph_model(cfg: ExperimentConfig, g: int) -> tuple[MixedModel, Trajectory]:
    """Ground-truth model and longest-horizon trajectory of graph ``g``."""
    model = sample_model(cfg.model, _rng(cfg.seed, g, _MODEL))
    return model, simulate(model, cfg.max_horizon, cfg.model.eps_lambda)


@dataclass
class RunOutcome:
    graph: int
    T: int
    algorithm: str
    metrics: dict[str, float]
    status: str = "ok"
    adjacency: np.ndarray | None = None

    def rows(self) -> list[dict]:
        base = {"graph": self.graph, "T": self.T, "algorithm": self.algorithm, "status": self.status}
        if not self.metrics:
            return [{**base, "metric": "", "value": float("nan")}]
        return [{**base, "metric": k, "value": v} for k, v in self.metrics.items()]


def _score(model: MixedModel, cfg: ExperimentConfig, g: int, predictor, adjacency=None,
           rules=None) -> dict[str, float]:
    out: dict[str, float] = {}
    if adjacency is not None:
        out["tpr"], out["fpr"] = tpr_fpr(model.graph, adjacency)
    # every algorithm sees the same evaluation states of a graph
    out["rmse"] = prediction_rmse(predictor, model, cfg.eval_pairs, _rng(cfg.seed, g, _EVAL))
    if rules is not None:
        for rule, acc in rule_accuracy(model.rule_types, rules).items():
            out[ACC_METRICS[rule]] = acc
    return out


def _bandit_outcomes(cfg, model, traj, g, T, algo, initial_name, wanted) -> list[RunOutcome]:
    """Runs one bandit variant and reports its initial estimate too when requested."""
    plus = algo == "eGp"
    bcfg = random_search_config(cfg.bandit) if algo == "RS" else cfg.bandit
    if algo not in wanted:
        bcfg = replace(bcfg, n_iter=0)
    run: BanditRun = run_bandit(traj, bcfg, cfg.learner, _run_seed(cfg.seed, g, T, algo), plus=plus)
    outs = []
    pairs = [(initial_name, run.initial)] if initial_name in wanted else []
    if algo in wanted:
        pairs.append((algo, run.estimate))
    for name, est in pairs:
        est: JointEstimate
        m = _score(model, cfg, g, est, est.adjacency, est.rules)
        outs.append(RunOutcome(g, T, name, m, adjacency=est.adjacency))
    return outs


def _linear_outcome(cfg, model, traj, g, T, algo) -> RunOutcome:
    fit = fit_linear(traj, algo.lower())
    m = _score(model, cfg, g, fit, fit.adjacency())
    m["failed_agents"] = float(fit.failures)
    m["fallback_agents"] = float(len(fit.fallbacks))
    status = "ok" if fit.failures == 0 else f"ok: {fit.failures} agents without a fit predict no change"
    return RunOutcome(g, T, algo, m, status, fit.adjacency())


def run_task(cfg: ExperimentConfig, g: int, T: int) -> list[RunOutcome]:
    """All requested algorithms on graph ``g`` with horizon ``T``; failures become status rows."""
    model, full = graph_model(cfg, g)
    traj = full.prefix(T)
    wanted = set(cfg.algorithms)
    jobs = []
    if wanted & {"IE", "eG"}:
        jobs.append(("eG", "IE"))
    if "RS" in wanted:
        jobs.append(("RS", None))
    if wanted & {"IEp", "eGp"}:
        jobs.append(("eGp", "IEp"))
    outcomes: list[RunOutcome] = []
    for algo, init in jobs:
        try:
            outcomes += _bandit_outcomes(cfg, model, traj, g, T, algo, init, wanted)
        except Exception as exc:  # a failed run is reported, not fatal
            log.exception("graph %d T=%d %s failed", g, T, algo)
            for name in (algo, init):
                if name in wanted:
                    outcomes.append(RunOutcome(g, T, name, {}, f"error: {type(exc).__name__}: {exc}"))
    for algo in ("OLS", "SS", "GPR"):
        if algo not in wanted:
            continue
        try:
            if algo == "GPR":
                outcomes.append(RunOutcome(g, T, algo, _score(model, cfg, g, GPRBaseline.fit(traj))))
            else:
                outcomes.append(_linear_outcome(cfg, model, traj, g, T, algo))
        except Exception as exc:
            log.exception("graph %d T=%d %s failed", g, T, algo)
            outcomes.append(RunOutcome(g, T, algo, {}, f"error: {type(exc).__name__}: {exc}"))
    order = {a: k for k, a in enumerate(ALGORITHMS)}
    return sorted(outcomes, key=lambda o: order[o.algorithm])


def _task_star(args):
    return run_task(*args)


@dataclass
class ExperimentResult:
    outcomes: list[RunOutcome]
    rows: list[dict]
    summary: list[dict]

    def values(self, algorithm: str, T: int, metric: str) -> np.ndarray:
        return np.array([r["value"] for r in self.rows
                         if r["algorithm"] == algorithm and r["T"] == T and r["metric"] == metric
                         and r["status"].startswith("ok")], dtype=float)

    def stat(self, algorithm: str, T: int, metric: str, stat: str) -> float:
        for r in self.summary:
            if (r["algorithm"], r["T"], r["metric"], r["stat"]) == (algorithm, T, metric, stat):
                return r["value"]
        raise KeyError((algorithm, T, metric, stat))


def summarize(rows: Iterable[dict]) -> list[dict]:
    """Mean and median of every (algorithm, T, metric) over successful runs, finite values only."""
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        if r["metric"] and r["status"].startswith("ok"):
            groups.setdefault((r["algorithm"], r["T"], r["metric"]), []).append(r["value"])
    order = {a: k for k, a in enumerate(ALGORITHMS)}
    out = []
    for (algo, T, metric) in sorted(groups, key=lambda k: (order[k[0]], k[1], k[2])):
        vals = np.array([v for v in groups[(algo, T, metric)] if math.isfinite(v)])
        for stat, fn in (("mean", np.mean), ("median", np.median)):
            value = float(fn(vals)) if vals.size else float("nan")
            out.append({"algorithm": algo, "T": T, "metric": metric, "stat": stat,
                        "value": value, "count": int(vals.size)})
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(path: Path, fields: Iterable[str], rows: Iterable[dict]) -> None:
    fields = list(fields)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r[f]) for f in fields])


def write_outputs(cfg: ExperimentConfig, result: ExperimentResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    # the echoed config leaves out the output path so reruns elsewhere compare equal
    dump_config(replace(cfg, out=None), out / "config.yaml")
    write_csv(out / "runs.csv", RUN_FIELDS, result.rows)
    write_csv(out / "summary.csv", SUMMARY_FIELDS, result.summary)
    for sub in ("graphs", "trajectories", "estimates"):
        (out / sub).mkdir(exist_ok=True)
    for g in range(cfg.n_graphs):
        model, traj = graph_model(cfg, g)
        write_edge_list(model.graph, out / "graphs" / f"g{g:02d}.txt")
        write_trajectory_csv(traj, out / "trajectories" / f"g{g:02d}.csv")
    for o in result.outcomes:
        if o.adjacency is not None:
            write_adjacency_csv(o.adjacency, out / "estimates" / f"g{o.graph:02d}_T{o.T}_{o.algorithm}.csv")


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Runs the roster on every graph and horizon; writes CSVs when ``cfg.out`` is set."""
    tasks = [(cfg, g, T) for g in range(cfg.n_graphs) for T in cfg.horizons]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_task = list(pool.map(_task_star, tasks))
    else:
        per_task = [_task_star(t) for t in tasks]
    outcomes = [o for batch in per_task for o in batch]
    rows = [r for o in outcomes for r in o.rows()]
    result = ExperimentResult(outcomes, rows, summarize(rows))
    if cfg.out is not None:
        write_outputs(cfg, result, Path(cfg.out))
    return result
