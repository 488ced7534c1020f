"""Shared instance builders for the tests."""

from __future__ import annotations

import numpy as np

from opinionlearn.dynamics import ModelGenConfig, RuleType, sample_model, simulate
from opinionlearn.learners import NeighborHints


def mixed_instance(seed: int, counts=(3, 3, 2, 2), T: int | None = None, **kw):
    """A sampled mixed model with its noiseless trajectory (default T = n + 2)."""
    gen = ModelGenConfig(counts=counts, **kw)
    model = sample_model(gen, np.random.default_rng(seed))
    return model, simulate(model, gen.n + 2 if T is None else T)


def correct_hints(model, i: int) -> NeighborHints:
    """neigh = positive neighbours (self included), non = non-neighbours."""
    row = model.graph.adj[i]
    return NeighborHints(frozenset(np.flatnonzero(row == 1).tolist()),
                         frozenset(np.flatnonzero(row == 0).tolist()))


def agents_of(model, rule: RuleType) -> list[int]:
    return [i for i, r in enumerate(model.rules) if r.rule is rule]


def generic_model(rule: RuleType, seed: int, n: int = 10, lam: float = 0.5, c: float = 0.25):
    """Single-rule model with randomly drawn weights.

    Uniform weights on graphs with symmetric structure give repeated
    eigenvalues, and the trajectory then spans fewer than n directions no
    matter how long it is. Random weights avoid that. DeGroot/FJ weights are
    half Dirichlet, half uniform, so none falls below the learner's floor.
    """
    from opinionlearn.dynamics import AgentRule, MixedModel
    from opinionlearn.graph import GraphGenConfig, default_link_probability, generate_mixed_graph

    rng = np.random.default_rng(seed)
    rep = frozenset(range(n)) if rule is RuleType.REPELL else frozenset()
    g = generate_mixed_graph(GraphGenConfig(n, default_link_probability(n), rep), rng)
    agents = []
    for i in range(n):
        row = g.adj[i]
        if rule is RuleType.REPELL:
            w = np.where(row != 0, rng.uniform(0.05, 0.3, n) * row, 0.0)
            w[i] = 0.0
            w[i] = 1.0 - w.sum()
            theta = w
        elif rule is RuleType.HK:
            theta = np.array([c])
        else:
            pos = np.flatnonzero(row == 1)
            w = np.zeros(n)
            w[pos] = 0.5 * rng.dirichlet(np.ones(pos.size)) + 0.5 / pos.size
            theta = w if rule is RuleType.DEGROOT else np.append(w, lam)
        agents.append(AgentRule(rule, theta))
    return MixedModel(g, tuple(agents), rng.uniform(-1, 1, n))


def hk_hints(model, i: int) -> NeighborHints:
    row = model.graph.adj[i]
    return NeighborHints(frozenset(np.flatnonzero(row != 0).tolist()),
                         frozenset(np.flatnonzero(row == 0).tolist()))
