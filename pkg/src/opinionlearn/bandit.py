"""Epsilon-greedy bandit search over update rules and network topology.

The four update rules are the arms. For every agent the search keeps one
adjacency-row/parameter estimate per arm and a Q-table of payoffs
``-log(validation error)``. Each iteration picks an arm per agent
(epsilon-greedy), proposes a working adjacency matrix, and tries flipping
each candidate edge of the agent's row, keeping the flip with the smallest
validation error.

:func:`epsilon_greedy` runs the L1 learners. :func:`epsilon_greedy_plus`
runs the least-squares learners on fully specified neighbour sets and adds a
second phase per iteration that reconciles asymmetric edge estimates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .convex import SolveStatus, Status
from .dynamics import ALL_RULES, RuleType, Trajectory
from .graph import default_link_probability
from .learners import (
    LearnerConfig,
    LearnResult,
    NeighborHints,
    learn,
    predict_many,
    validation_error,
)

N_ARMS = 4
NEG_SENTINEL = -1e12

_SELECT, _GRAPH, _REPAIR = 0, 1, 2


@dataclass(frozen=True)
class BanditConfig:
    eps_m: float = 0.2
    eps_g: float = 0.2
    step_alpha: float = 0.1
    n_iter: int = 20
    t_split: int | None = None
    b_g: int = 16
    explore_p: float | None = None
    # plus variant only: a phase-one flip replaces the stored estimate only if strictly better
    plus_keep_best: bool = True

    def __post_init__(self) -> None:
        if not (0 <= self.eps_m <= 1 and 0 <= self.eps_g <= 1):
            raise ValueError("exploration probabilities must lie in [0, 1]")
        if not 0 < self.step_alpha <= 1:
            raise ValueError("step_alpha must lie in (0, 1]")
        if self.n_iter < 0:
            raise ValueError("n_iter must be nonnegative")
        if self.b_g < 1:
            raise ValueError("b_g must be positive")

    def split_for(self, T: int) -> int:
        """Training cut; defaults to floor(4T/5)."""
        return (4 * T) // 5 if self.t_split is None else self.t_split

    def link_probability(self, n: int) -> float:
        return default_link_probability(n) if self.explore_p is None else self.explore_p


def random_search_config(cfg: BanditConfig) -> BanditConfig:
    """The random-search baseline: full model and topology exploration."""
    return replace(cfg, eps_m=1.0, eps_g=1.0)


def substream(seed, *key: int) -> np.random.Generator:
    """Independent generator for a (iteration, agent, purpose) key under one master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True)
class DataSplit:
    """Training pairs (x(t), x(t+1)) for t < t_split, validation pairs for t_split <= t < T."""

    X_tr: np.ndarray
    B_tr: np.ndarray
    X_val: np.ndarray
    B_val: np.ndarray
    x0: np.ndarray

    @property
    def n(self) -> int:
        return self.X_tr.shape[1]


def split_trajectory(traj: Trajectory, t_split: int) -> DataSplit:
    T = traj.T
    if not 1 <= t_split < T:
        raise ValueError(f"t_split={t_split} needs 1 <= t_split < T={T}")
    s = traj.states
    return DataSplit(s[:t_split], s[1 : t_split + 1], s[t_split:T], s[t_split + 1 :], s[0])


class Evaluator:
    """Runs learners on one data split and memoises results per (arm, agent, hints).

    Learners are pure functions of their inputs, so the cache never changes
    results; it only skips repeated solves.
    """

    def __init__(self, data: DataSplit, lcfg: LearnerConfig, least_squares: bool,
                 repell_simplex: bool) -> None:
        self.data = data
        self.lcfg = lcfg
        self.least_squares = least_squares
        self.repell_simplex = repell_simplex
        self._cache: dict = {}
        self.calls = 0

    def run(self, arm: int, i: int, hints: NeighborHints, least_squares: bool | None = None) -> LearnResult:
        ls = self.least_squares if least_squares is None else least_squares
        key = (arm, i, hints.neigh, hints.non, ls)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        self.calls += 1
        d = self.data
        rule = RuleType.from_arm(arm)
        res = learn(rule, d.X_tr, d.B_tr[:, i], i, d.x0[i], hints, self.lcfg,
                    least_squares=ls, repell_simplex=self.repell_simplex)
        res.val_err = validation_error(res, rule, d.X_val, d.B_val[:, i], i, d.x0[i], self.lcfg)
        self._cache[key] = res
        return res


@dataclass
class BanditState:
    q: np.ndarray                       # (n, 4) payoffs
    adj_by_rule: np.ndarray             # (4, n, n) adjacency estimate per arm
    theta_by_rule: list[list[np.ndarray]]  # [arm][agent]
    best_err: np.ndarray                # (n, 4) running min of recorded errors
    cur_err: np.ndarray                 # (n, 4) validation error of the stored estimates
    rule_pick: np.ndarray               # (n,) current arm per agent
    iteration: int = 0
    history: list[np.ndarray] = field(default_factory=list)  # p_{i,m}(l), inf where not evaluated

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def copy(self) -> "BanditState":
        return BanditState(
            self.q.copy(), self.adj_by_rule.copy(),
            [list(t) for t in self.theta_by_rule], self.best_err.copy(),
            self.cur_err.copy(), self.rule_pick.copy(), self.iteration, [h.copy() for h in self.history],
        )


@dataclass
class JointEstimate:
    adjacency: np.ndarray
    rules: list[RuleType]
    thetas: list[np.ndarray]

    def predict(self, x: np.ndarray, x0: np.ndarray) -> np.ndarray:
        """One-step prediction of all agents from state ``x`` with FJ anchor ``x0``."""
        x = np.asarray(x, dtype=float)
        return np.array([
            predict_many(r, th, self.adjacency[i], x[None, :], i, x0[i])[0]
            for i, (r, th) in enumerate(zip(self.rules, self.thetas))
        ])


def q_from_error(err: float) -> float:
    return -math.log(err) if math.isfinite(err) else NEG_SENTINEL


def update_q(q_prev: float, p: float, step_alpha: float) -> float:
    """(1 - alpha) q_prev - alpha log p; an infinite error maps to the sentinel."""
    if not math.isfinite(p):
        return NEG_SENTINEL
    return (1.0 - step_alpha) * q_prev - step_alpha * math.log(p)


def initialize(ev: Evaluator) -> BanditState:
    """Fit every arm for every agent with hints ({i}, {}) using the L1 learners."""
    n = ev.data.n
    q = np.empty((n, N_ARMS))
    err = np.empty((n, N_ARMS))
    adj = np.zeros((N_ARMS, n, n), dtype=np.int8)
    thetas: list[list[np.ndarray]] = [[None] * n for _ in range(N_ARMS)]
    for i in range(n):
        hints = NeighborHints(frozenset({i}))
        for arm in range(N_ARMS):
            res = ev.run(arm, i, hints, least_squares=False)
            err[i, arm] = res.val_err
            q[i, arm] = q_from_error(res.val_err)
            if res.ok:
                adj[arm, i] = res.row
                thetas[arm][i] = res.theta
            else:
                adj[arm, i, i] = 1
    picks = np.argmax(q, axis=1)
    return BanditState(q, adj, thetas, err.copy(), err.copy(), picks, 0, [err])


def select_rules(q: np.ndarray, eps_m: float, rng: np.random.Generator) -> np.ndarray:
    """Epsilon-greedy arm per agent; greedy ties go to the lowest arm."""
    n = q.shape[0]
    picks = np.empty(n, dtype=np.int64)
    for i in range(n):
        if rng.random() < eps_m:
            picks[i] = rng.integers(N_ARMS)
        else:
            picks[i] = int(np.argmax(q[i]))
    return picks


def random_adjacency(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(iu.size) < p
    A = np.eye(n, dtype=np.int8)
    A[iu[mask], ju[mask]] = 1
    A[ju[mask], iu[mask]] = 1
    return A


def propose_adjacency(state: BanditState, picks: np.ndarray, eps_g: float, explore_p: float,
                      rng: np.random.Generator) -> np.ndarray:
    """Presence matrix to refine: the selected arms' rows, or a random graph with prob ``eps_g``."""
    n = state.n
    if rng.random() < eps_g:
        return random_adjacency(n, explore_p, rng)
    A = np.abs(state.adj_by_rule[picks, np.arange(n)]).astype(np.int8)
    np.fill_diagonal(A, 1)
    return A


def flip_hints(i: int, j: int, row: np.ndarray, least_squares: bool) -> NeighborHints:
    """Hints that toggle edge (i, j) of a presence row; self-loop always kept."""
    n = row.shape[0]
    present = set(np.flatnonzero(row).tolist()) | {i}
    if row[j] == 0:
        neigh, non = present | {j}, set()
    else:
        neigh, non = present - {j}, {j}
    if least_squares:
        non = set(range(n)) - neigh
    return NeighborHints(frozenset(neigh), frozenset(non))


def edge_flip_refine(ev: Evaluator, i: int, arm: int, row: np.ndarray) -> tuple[LearnResult, int]:
    """Best single-edge flip of ``row`` for agent ``i`` under ``arm``; ties go to the lowest j.

    Returns ``(result, j)``; ``j`` is -1 and the error infinite when no flip
    produced a feasible fit.
    """
    best, best_j = None, -1
    for j in range(row.shape[0]):
        if j == i:
            continue
        res = ev.run(arm, i, flip_hints(i, j, row, ev.least_squares))
        if best is None or res.val_err < best.val_err:
            best, best_j = res, j
    if best is None or not math.isfinite(best.val_err):
        status = best.status if best is not None else SolveStatus(Status.INFEASIBLE)
        return LearnResult(np.zeros(row.shape[0], dtype=np.int8), None, status, float("inf")), -1
    return best, best_j


@dataclass
class RepairOutcome:
    row: np.ndarray
    theta: np.ndarray
    err: float
    inconsistent: list[int]
    n_candidates: int


def _candidate_subsets(items: list[int], budget: int, rng: np.random.Generator):
    if 2 ** len(items) <= budget:
        for mask in range(2 ** len(items)):
            yield [u for b, u in enumerate(items) if mask >> b & 1]
    else:
        for _ in range(budget):
            keep = rng.random(len(items)) < 0.5
            yield [u for u, k in zip(items, keep) if k]


def inconsistency_repair(ev: Evaluator, i: int, arm: int, snapshot: np.ndarray, best_arms: np.ndarray,
                         row: np.ndarray, theta: np.ndarray, err: float, b_g: int,
                         rng: np.random.Generator) -> RepairOutcome:
    """Budgeted search over the entries of agent ``i``'s row that disagree with the transposed estimates.

    ``snapshot`` holds the per-arm adjacency estimates after phase one of the
    current iteration and ``best_arms[j]`` the arm with the smallest recorded
    error of agent j. Entries outside the inconsistent set keep their current
    presence; every subset of the inconsistent set is tried when the budget
    allows, otherwise ``b_g`` random subsets. A candidate replaces the current
    estimate only if its validation error is strictly smaller.
    """
    n = row.shape[0]
    transposed = snapshot[best_arms, np.arange(n), i]
    incst = [j for j in range(n) if j != i and transposed[j] != row[j]]
    if not incst:
        return RepairOutcome(row, theta, err, incst, 0)
    fixed = (set(np.flatnonzero(row).tolist()) - set(incst)) | {i}
    out = RepairOutcome(row, theta, err, incst, 0)
    for subset in _candidate_subsets(incst, b_g, rng):
        out.n_candidates += 1
        neigh = frozenset(fixed | set(subset))
        res = ev.run(arm, i, NeighborHints.complement(neigh, n), least_squares=True)
        if res.val_err < out.err:
            out.row, out.theta, out.err = res.row, res.theta, res.val_err
    return out


def repair_phase(ev: Evaluator, state: BanditState, picks: np.ndarray, p_iter: np.ndarray,
                 cfg: BanditConfig, seed, iteration: int,
                 order: Sequence[int] | None = None) -> dict[int, RepairOutcome]:
    """Repair every agent against one frozen phase-one snapshot.

    Outcomes are collected first and applied by the caller, so no agent sees
    another agent's repair from the same iteration; ``order`` exists to check
    that property.
    """
    n = state.n
    snapshot = state.adj_by_rule.copy()
    best_arms = np.argmin(np.minimum(state.best_err, p_iter), axis=1)
    outcomes = {}
    for i in (range(n) if order is None else order):
        k = int(picks[i])
        outcomes[i] = inconsistency_repair(
            ev, i, k, snapshot, best_arms, snapshot[k, i], state.theta_by_rule[k][i],
            float(p_iter[i, k]), cfg.b_g, substream(seed, iteration, i, _REPAIR),
        )
    return outcomes


def _estimate(state: BanditState, arms: np.ndarray) -> JointEstimate:
    n = state.n
    adjacency = np.array([state.adj_by_rule[arms[i], i] for i in range(n)], dtype=np.int8)
    return JointEstimate(
        adjacency,
        [RuleType.from_arm(a) for a in arms],
        [state.theta_by_rule[a][i] for i, a in enumerate(arms)],
    )


def estimate_from_q(state: BanditState) -> JointEstimate:
    return _estimate(state, np.argmax(state.q, axis=1))


def estimate_from_best_error(state: BanditState) -> JointEstimate:
    return _estimate(state, np.argmin(state.best_err, axis=1))


Checkpoint = Callable[[int, BanditState], None]


@dataclass
class BanditRun:
    estimate: JointEstimate
    initial: JointEstimate
    state: BanditState
    learner_calls: int


def run_bandit(traj: Trajectory, cfg: BanditConfig, lcfg: LearnerConfig, seed, plus: bool = False,
               checkpoint: Checkpoint | None = None) -> BanditRun:
    """Shared driver of :func:`epsilon_greedy` and :func:`epsilon_greedy_plus`."""
    data = split_trajectory(traj, cfg.split_for(traj.T))
    ev = Evaluator(data, lcfg, least_squares=plus, repell_simplex=plus)
    state = initialize(ev)
    initial = estimate_from_q(state)
    if checkpoint:
        checkpoint(0, state)
    n = data.n
    explore_p = cfg.link_probability(n)
    for l in range(1, cfg.n_iter + 1):
        picks = select_rules(state.q, cfg.eps_m, substream(seed, l, 0, _SELECT))
        A_tilde = propose_adjacency(state, picks, cfg.eps_g, explore_p, substream(seed, l, 0, _GRAPH))
        p_iter = np.full((n, N_ARMS), np.inf)
        q_prev = state.q.copy()
        for i in range(n):
            k = int(picks[i])
            res, j = edge_flip_refine(ev, i, k, A_tilde[i])
            if plus and cfg.plus_keep_best and not res.val_err < state.cur_err[i, k]:
                j = -1
            if j >= 0:
                state.adj_by_rule[k, i] = res.row
                state.theta_by_rule[k][i] = res.theta
                state.cur_err[i, k] = res.val_err
            # no accepted flip: the stored estimate stands and is scored as is
            p_iter[i, k] = state.cur_err[i, k]
        if plus:
            for i, out in repair_phase(ev, state, picks, p_iter, cfg, seed, l).items():
                k = int(picks[i])
                state.adj_by_rule[k, i] = out.row
                state.theta_by_rule[k][i] = out.theta
                state.cur_err[i, k] = out.err
                p_iter[i, k] = out.err
        for i in range(n):
            k = int(picks[i])
            state.q[i, k] = update_q(q_prev[i, k], p_iter[i, k], cfg.step_alpha)
        state.best_err = np.minimum(state.best_err, p_iter)
        state.history.append(p_iter)
        state.rule_pick = picks
        state.iteration = l
        if checkpoint:
            checkpoint(l, state)
    final = estimate_from_best_error(state) if plus else estimate_from_q(state)
    return BanditRun(final, initial, state, ev.calls)


def epsilon_greedy(traj: Trajectory, cfg: BanditConfig = BanditConfig(),
                   lcfg: LearnerConfig = LearnerConfig(), seed=0,
                   checkpoint: Checkpoint | None = None) -> JointEstimate:
    """Epsilon-greedy joint learner with L1 learners; final rules by Q-table argmax."""
    return run_bandit(traj, cfg, lcfg, seed, plus=False, checkpoint=checkpoint).estimate


def epsilon_greedy_plus(traj: Trajectory, cfg: BanditConfig = BanditConfig(),
                        lcfg: LearnerConfig = LearnerConfig(), seed=0,
                        checkpoint: Checkpoint | None = None) -> JointEstimate:
    """Least-squares variant with inconsistency repair; final rules by smallest recorded error."""
    return run_bandit(traj, cfg, lcfg, seed, plus=True, checkpoint=checkpoint).estimate


def random_search(traj: Trajectory, cfg: BanditConfig = BanditConfig(),
                  lcfg: LearnerConfig = LearnerConfig(), seed=0,
                  checkpoint: Checkpoint | None = None) -> JointEstimate:
    return epsilon_greedy(traj, random_search_config(cfg), lcfg, seed, checkpoint)


class JsonlCheckpoint:
    """Appends one JSON object per iteration: Q-table, per-arm adjacencies and errors."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.path.write_text("")

    def __call__(self, l: int, state: BanditState) -> None:
        def num(a):
            return [[None if not math.isfinite(v) else v for v in row] for row in np.asarray(a, float)]

        rec = {
            "iteration": l,
            "q": num(state.q),
            "best_err": num(state.best_err),
            "last_err": num(state.history[-1]),
            "rule_pick": [int(k) + 1 for k in state.rule_pick],
            "adj_by_rule": {r.name: state.adj_by_rule[r.arm].tolist() for r in ALL_RULES},
        }
        with self.path.open("a") as fh:
            fh.write(json.dumps(rec) + "\n")


def read_checkpoints(path: str | Path) -> list[dict]:
    return [json.loads(ln) for ln in Path(path).read_text().splitlines() if ln.strip()]
