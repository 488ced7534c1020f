"""Per-agent learners for a single, known update rule.

Each learner receives training data ``X`` (rows x(t)) and targets ``b``
(entries x_i(t+1)) plus neighbour hints, and returns an estimated adjacency
row together with a parameter vector. The L1 learners keep ``X y = b`` as an
exact equality; the ``*_ls`` variants minimise the squared residual instead
and are meant to be called with fully specified neighbour sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .convex import LinearConstraintSet, SolveStatus, Status, constrained_lsq, min_l1
from .dynamics import RuleType, step_hk

TAU_SUPP = 1e-6


@dataclass(frozen=True)
class NeighborHints:
    """Forced neighbours (``neigh``) and forced non-neighbours (``non``) of one agent."""

    neigh: frozenset[int]
    non: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "neigh", frozenset(int(j) for j in self.neigh))
        object.__setattr__(self, "non", frozenset(int(j) for j in self.non))
        if self.neigh & self.non:
            raise ValueError("neigh and non must be disjoint")

    @classmethod
    def complement(cls, neigh: Iterable[int], n: int) -> "NeighborHints":
        neigh = frozenset(neigh)
        return cls(neigh, frozenset(range(n)) - neigh)


@dataclass(frozen=True)
class LearnerConfig:
    eps_w: float = 1e-3
    eps_lambda: float = 0.1
    eps_c: float = 1e-6
    err_floor: float = 1e-12
    tau_supp: float = TAU_SUPP

    def __post_init__(self) -> None:
        if min(self.eps_w, self.eps_lambda, self.eps_c, self.err_floor) <= 0:
            raise ValueError("learner tolerances must be strictly positive")
        if self.eps_lambda >= 0.5:
            raise ValueError("eps_lambda must be below 1/2")


@dataclass
class LearnResult:
    row: np.ndarray
    theta: np.ndarray | None
    status: SolveStatus
    val_err: float = float("nan")

    @property
    def ok(self) -> bool:
        return self.status.ok


def _failed(n: int, status: SolveStatus) -> LearnResult:
    return LearnResult(np.zeros(n, dtype=np.int8), None, status, float("inf"))


def _indicator(y: np.ndarray, tau: float) -> np.ndarray:
    return (y > tau).astype(np.int8)


def _signs(y: np.ndarray, tau: float) -> np.ndarray:
    return np.where(np.abs(y) > tau, np.sign(y), 0).astype(np.int8)


def _bounds(dim: int, hints: NeighborHints, floor: float, nonneg_rest: bool):
    lb = np.full(dim, 0.0 if nonneg_rest else -np.inf)
    for j in hints.neigh:
        lb[j] = floor
    return lb


def _solve(X, b, cons, least_squares):
    if least_squares:
        return constrained_lsq(X, b, cons)
    A = np.vstack([X, cons.A_eq])
    rhs = np.concatenate([b, cons.b_eq])
    full = LinearConstraintSet(cons.dim, A, rhs, cons.lb, cons.ub, cons.fixed_zero)
    return min_l1(cons.dim, full)


def _degroot(X, b, hints, cfg, least_squares):
    X = np.atleast_2d(X)
    n = X.shape[1]
    # the least-squares variant only bounds forced neighbours
    lb = _bounds(n, hints, cfg.eps_w, nonneg_rest=not least_squares)
    cons = LinearConstraintSet(n, np.ones((1, n)), [1.0], lb, None, hints.non)
    y, st = _solve(X, b, cons, least_squares)
    if not st.ok:
        return _failed(n, st)
    return LearnResult(_indicator(y, cfg.tau_supp), y, st)


def learn_degroot(X, b, hints: NeighborHints, cfg: LearnerConfig = LearnerConfig()) -> LearnResult:
    """Sparsest simplex weights with ``X y = b``."""
    return _degroot(X, b, hints, cfg, least_squares=False)


def learn_degroot_ls(X, b, hints: NeighborHints, cfg: LearnerConfig = LearnerConfig()) -> LearnResult:
    return _degroot(X, b, hints, cfg, least_squares=True)


def _fj(X, b, x_i0, hints, cfg, least_squares):
    X = np.atleast_2d(X)
    T, n = X.shape
    design = np.hstack([X, np.full((T, 1), float(x_i0))])
    lb = _bounds(n + 1, hints, cfg.eps_w * cfg.eps_lambda, nonneg_rest=not least_squares)
    ub = np.full(n + 1, np.inf)
    lb[n] = cfg.eps_lambda
    ub[n] = 1.0 - cfg.eps_lambda
    cons = LinearConstraintSet(n + 1, np.ones((1, n + 1)), [1.0], lb, ub, hints.non)
    y, st = _solve(design, b, cons, least_squares)
    if not st.ok:
        return _failed(n, st)
    stay = y[n]
    assert stay < 1.0, "anchor weight must stay below one"
    theta = np.append(y[:n] / (1.0 - stay), 1.0 - stay)
    return LearnResult(_indicator(y[:n], cfg.tau_supp), theta, st)


def learn_fj(X, b, x_i0: float, hints: NeighborHints, cfg: LearnerConfig = LearnerConfig()) -> LearnResult:
    """FJ learner on the design [X, x_i(0) 1]; returns theta = [w; lambda]."""
    return _fj(X, b, x_i0, hints, cfg, least_squares=False)


def learn_fj_ls(X, b, x_i0: float, hints: NeighborHints, cfg: LearnerConfig = LearnerConfig()) -> LearnResult:
    return _fj(X, b, x_i0, hints, cfg, least_squares=True)


def learn_repell(X, b, hints: NeighborHints, cfg: LearnerConfig = LearnerConfig(),
                 simplex: bool = False) -> LearnResult:
    """Sparsest signed weights with ``X y = b``.

    ``simplex=True`` adds the constraint sum(y) = 1 that the repelling
    weights satisfy by construction.
    """
    X = np.atleast_2d(X)
    n = X.shape[1]
    lb = _bounds(n, hints, cfg.eps_w, nonneg_rest=False)
    eq = (np.ones((1, n)), [1.0]) if simplex else (None, None)
    cons = LinearConstraintSet(n, eq[0], eq[1], lb, None, hints.non)
    y, st = _solve(X, b, cons, least_squares=False)
    if not st.ok:
        return _failed(n, st)
    return LearnResult(_signs(y, cfg.tau_supp), y, st)


def learn_repell_ls(X, b, hints: NeighborHints, cfg: LearnerConfig = LearnerConfig()) -> LearnResult:
    """Least squares on the simplex hyperplane with non-neighbours pinned to zero (no weight floor)."""
    X = np.atleast_2d(X)
    n = X.shape[1]
    cons = LinearConstraintSet(n, np.ones((1, n)), [1.0], None, None, hints.non)
    y, st = constrained_lsq(X, b, cons)
    if not st.ok:
        return _failed(n, st)
    return LearnResult(_signs(y, cfg.tau_supp), y, st)


def hk_sample_bounds(X, b, i: int, neigh: Sequence[int], eps_c: float, tie_tol: float = 1e-12) -> np.ndarray:
    """Per-sample upper estimates c(t) of the confidence bound (inf when every neighbour is used)."""
    X = np.atleast_2d(X)
    others = sorted(j for j in set(neigh) if j != i)
    out = np.empty(X.shape[0])
    for t, (x, target) in enumerate(zip(X, b)):
        dist = {j: abs(x[j] - x[i]) for j in others}
        order = [i] + sorted(others, key=lambda j: (dist[j], j))
        vals = x[order]
        prefix = np.cumsum(vals) / np.arange(1, len(order) + 1)
        gap = np.abs(prefix - target)
        m = int(np.flatnonzero(gap <= gap.min() + tie_tol)[-1]) + 1  # largest argmin, 1-based
        out[t] = np.inf if m == len(order) else abs(vals[m] - x[i]) - eps_c
    return out


def learn_hk(X, b, i: int, hints: NeighborHints, cfg: LearnerConfig = LearnerConfig()) -> LearnResult:
    """Confidence-bound heuristic for the social HK rule; the row is exactly ``hints.neigh``.

    When no sample bounds c from above, c is set to twice the largest
    absolute opinion in ``X`` (everyone trusted). Negative estimates are
    clamped to zero.
    """
    X = np.atleast_2d(X)
    n = X.shape[1]
    neigh = set(hints.neigh) | {i}
    row = np.zeros(n, dtype=np.int8)
    row[sorted(neigh)] = 1
    c = float(np.min(hk_sample_bounds(X, b, i, sorted(neigh), cfg.eps_c)))
    if not np.isfinite(c):
        c = 2.0 * float(np.max(np.abs(X)))
    c = max(c, 0.0)
    return LearnResult(row, np.array([c]), SolveStatus(Status.OPTIMAL, 0.0))


def learn(rule: RuleType, X, b, i: int, x_i0: float, hints: NeighborHints,
          cfg: LearnerConfig = LearnerConfig(), least_squares: bool = False,
          repell_simplex: bool = False) -> LearnResult:
    """Dispatch to the learner of ``rule``."""
    rule = RuleType(rule)
    if rule is RuleType.HK:
        return learn_hk(X, b, i, hints, cfg)
    if least_squares:
        if rule is RuleType.DEGROOT:
            return learn_degroot_ls(X, b, hints, cfg)
        if rule is RuleType.FJ:
            return learn_fj_ls(X, b, x_i0, hints, cfg)
        return learn_repell_ls(X, b, hints, cfg)
    if rule is RuleType.DEGROOT:
        return learn_degroot(X, b, hints, cfg)
    if rule is RuleType.FJ:
        return learn_fj(X, b, x_i0, hints, cfg)
    return learn_repell(X, b, hints, cfg, simplex=repell_simplex)


# -- prediction ---------------------------------------------------------------------

def predict(rule: RuleType, theta, row, x, i: int, x_i0: float) -> float:
    """One-step prediction of agent ``i`` from estimated parameters."""
    return float(predict_many(rule, theta, row, np.atleast_2d(x), i, np.array([x_i0]))[0])


def predict_many(rule: RuleType, theta, row, X, i: int, x_i0) -> np.ndarray:
    """Vectorised :func:`predict` over the rows of ``X``; ``x_i0`` may be scalar or per-row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    theta = np.asarray(theta, dtype=float)
    rule = RuleType(rule)
    if rule in (RuleType.DEGROOT, RuleType.REPELL):
        if theta.shape[0] != X.shape[1]:
            raise ValueError("parameter length does not match state length")
        return X @ theta
    if rule is RuleType.FJ:
        if theta.shape[0] != X.shape[1] + 1:
            raise ValueError("parameter length does not match state length")
        lam = theta[-1]
        return lam * (X @ theta[:-1]) + (1.0 - lam) * np.broadcast_to(np.asarray(x_i0, dtype=float), X.shape[:1])
    c = float(theta[0])
    return np.array([step_hk(c, row, x, i) for x in X])


def validation_error(result: LearnResult, rule: RuleType, X_val, b_val, i: int, x_i0: float,
                     cfg: LearnerConfig = LearnerConfig()) -> float:
    """RMSE of one-step predictions on validation pairs, floored at ``cfg.err_floor``."""
    if not result.ok or result.theta is None:
        return float("inf")
    X_val = np.atleast_2d(X_val)
    if X_val.shape[0] == 0:
        raise ValueError("validation set is empty")
    pred = predict_many(rule, result.theta, result.row, X_val, i, x_i0)
    err = float(np.sqrt(np.mean((pred - np.asarray(b_val)) ** 2)))
    if not np.isfinite(err):
        return float("inf")
    return max(err, cfg.err_floor)
