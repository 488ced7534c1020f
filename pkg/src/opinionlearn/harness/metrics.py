"""Topology, prediction and rule-type scores of an estimate against the true model."""

from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np

from ..dynamics import ALL_RULES, MixedModel, RuleType, one_step
from ..graph import SignedGraph


class Predictor(Protocol):
    def predict(self, x: np.ndarray, x0: np.ndarray) -> np.ndarray: ...


def tpr_fpr(A_true, A_hat) -> tuple[float, float]:
    """Presence-based rates over directed off-diagonal entries.

    A rate whose denominator is empty (complete or empty true graph) is NaN.
    """
    A = A_true.adj if isinstance(A_true, SignedGraph) else np.asarray(A_true)
    B = np.asarray(A_hat)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    off = ~np.eye(A.shape[0], dtype=bool)
    truth = (A != 0) & off
    est = (B != 0) & off
    P, N = truth.sum(), (~truth & off).sum()
    tp, fp = (est & truth).sum(), (est & ~truth & off).sum()
    return (tp / P if P else float("nan")), (fp / N if N else float("nan"))


def eval_states(n: int, n_pairs: int, rng: np.random.Generator) -> np.ndarray:
    """Fresh initial states, iid Uniform(-1, 1)."""
    return rng.uniform(-1.0, 1.0, size=(n_pairs, n))


def prediction_rmse(estimate: Predictor, model: MixedModel, n_pairs: int,
                    rng: np.random.Generator) -> float:
    """sqrt(sum_g ||xhat_g(1) - x_g(1)||^2 / n_pairs) over fresh starting states.

    Each pair starts a new trajectory, so FJ agents anchor to that pair's
    own initial state.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be positive")
    total = 0.0
    for x0 in eval_states(model.n, n_pairs, rng):
        x1 = one_step(model, x0, x0)
        xhat = np.asarray(estimate.predict(x0, x0), dtype=float)
        total += float(np.sum((xhat - x1) ** 2))
    return float(np.sqrt(total / n_pairs))


def rule_accuracy(rules_true: Sequence[RuleType], rules_hat: Sequence[RuleType]) -> dict[RuleType, float]:
    """Fraction of agents of each true rule whose estimated rule matches; NaN for absent rules."""
    if len(rules_true) != len(rules_hat):
        raise ValueError("rule lists differ in length")
    truth = np.array([RuleType(r) for r in rules_true])
    hat = np.array([RuleType(r) for r in rules_hat])
    out = {}
    for rule in ALL_RULES:
        mask = truth == rule
        out[rule] = float(np.mean(hat[mask] == rule)) if mask.any() else float("nan")
    return out
