"""Mixed opinion dynamics: per-rule update steps, simulation and model sampling.

Four update rules are supported, and each agent follows exactly one of them:

* DeGroot: weighted average of neighbours, weights on the simplex.
* Friedkin-Johnsen (FJ): DeGroot step blended with the agent's initial
  opinion through a susceptibility ``lam``.
* Repell: signed weights; negative neighbours push the opinion away.
* social Hegselmann-Krause (HK): plain average over the neighbours whose
  opinion lies within a confidence bound ``c``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import (
    GraphGenConfig,
    SignedGraph,
    default_link_probability,
    degrees,
    generate_mixed_graph,
    is_connected,
)


class RuleType(enum.IntEnum):
    """Update-rule labels; the integer values are the bandit arm numbers."""

    DEGROOT = 1
    FJ = 2
    REPELL = 3
    HK = 4

    @property
    def arm(self) -> int:
        """0-based column of this rule in a Q-table."""
        return self.value - 1

    @classmethod
    def from_arm(cls, arm: int) -> "RuleType":
        return cls(int(arm) + 1)


ALL_RULES: tuple[RuleType, ...] = tuple(RuleType)


class ModelError(ValueError):
    """Raised when a model violates the well-posedness assumptions."""


@dataclass(frozen=True)
class AgentRule:
    """Rule tag plus parameters.

    ``theta`` is a weight vector of length n (DeGroot, Repell), weights plus
    susceptibility of length n+1 (FJ), or a one-element array holding the
    confidence bound (HK).
    """

    rule: RuleType
    theta: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "rule", RuleType(self.rule))
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float)).copy()
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def confidence(self) -> float:
        return float(self.theta[0])


@dataclass(frozen=True)
class MixedModel:
    graph: SignedGraph
    rules: tuple[AgentRule, ...]
    x0: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", tuple(self.rules))
        x0 = np.asarray(self.x0, dtype=float).copy()
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        if len(self.rules) != self.graph.n or x0.shape != (self.graph.n,):
            raise ValueError("rules and x0 must have one entry per agent")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def rule_types(self) -> list[RuleType]:
        return [r.rule for r in self.rules]

    def with_x0(self, x0: np.ndarray) -> "MixedModel":
        return MixedModel(self.graph, self.rules, x0)


@dataclass(frozen=True)
class Trajectory:
    """States x(0..T), one row per time step."""

    states: np.ndarray

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] < 2:
            raise ValueError("a trajectory needs at least two time steps")
        object.__setattr__(self, "states", states)

    @property
    def T(self) -> int:
        return self.states.shape[0] - 1

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def x0(self) -> np.ndarray:
        return self.states[0]

    @property
    def X(self) -> np.ndarray:
        """Data matrix [x(0) ... x(T-1)]^T."""
        return self.states[:-1]

    def b(self, i: int) -> np.ndarray:
        """Targets [x_i(1) ... x_i(T)]^T."""
        return self.states[1:, i]

    def prefix(self, T: int) -> "Trajectory":
        """The first T steps, i.e. states x(0..T)."""
        if not 1 <= T <= self.T:
            raise ValueError(f"prefix length {T} outside [1, {self.T}]")
        return Trajectory(self.states[: T + 1])


# -- step functions -----------------------------------------------------------

def _check_len(theta: np.ndarray, x: np.ndarray, extra: int = 0) -> None:
    if theta.shape[0] != x.shape[0] + extra:
        raise ValueError(f"parameter length {theta.shape[0]} does not match state length {x.shape[0]}")


def step_degroot(theta, x) -> float:
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    _check_len(theta, x)
    return float(theta @ x)


def step_fj(theta, x, x_i0: float) -> float:
    """``theta = [w; lam]``; returns lam * w.x + (1 - lam) * x_i0."""
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    _check_len(theta, x, extra=1)
    lam = theta[-1]
    return float(lam * (theta[:-1] @ x) + (1.0 - lam) * x_i0)


def step_repell(theta, x) -> float:
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    _check_len(theta, x)
    return float(theta @ x)


def step_hk(c: float, neighbor_row, x, i: int) -> float:
    """Average of the neighbours within distance ``c`` of agent ``i`` (ties included)."""
    x = np.asarray(x, dtype=float)
    row = np.asarray(neighbor_row)
    trusted = (row != 0) & (np.abs(x - x[i]) <= c)
    trusted[i] = True
    return float(x[trusted].mean())


def agent_step(rule: AgentRule, row: np.ndarray, x: np.ndarray, i: int, x_i0: float) -> float:
    if rule.rule is RuleType.DEGROOT:
        return step_degroot(rule.theta, x)
    if rule.rule is RuleType.FJ:
        return step_fj(rule.theta, x, x_i0)
    if rule.rule is RuleType.REPELL:
        return step_repell(rule.theta, x)
    return step_hk(rule.confidence, row, x, i)


def one_step(model: MixedModel, x: np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
    """Synchronous update x(t) -> x(t+1); FJ agents anchor to ``x0`` (default: model.x0)."""
    x = np.asarray(x, dtype=float)
    anchor = model.x0 if x0 is None else np.asarray(x0, dtype=float)
    adj = model.graph.adj
    return np.array(
        [agent_step(r, adj[i], x, i, anchor[i]) for i, r in enumerate(model.rules)]
    )


def simulate(model: MixedModel, T: int, eps_lambda: float = 0.1) -> Trajectory:
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    violations = validate_assumptions(model, eps_lambda)
    if violations:
        raise ModelError("; ".join(violations))
    states = np.empty((T + 1, model.n))
    states[0] = model.x0
    for t in range(T):
        states[t + 1] = one_step(model, states[t])
    return Trajectory(states)


# -- assumptions ---------------------------------------------------------------

def validate_assumptions(model: MixedModel, eps_lambda: float = 0.1, tol: float = 1e-9) -> list[str]:
    """List violated well-posedness clauses (i)-(iv); an empty list means the model is valid.

    Besides the four clauses, parameter vectors are checked against the
    structural constraints of their rule (simplex weights, sign pattern,
    support), reported under the clause they belong to.
    """
    g = model.graph
    out: list[str] = []
    if not is_connected(g):
        out.append("(i) graph is not connected")
    xmax = float(np.max(np.abs(model.x0)))
    for i, r in enumerate(model.rules):
        d_minus = degrees(g, i)[1]
        if (d_minus > 0) != (r.rule is RuleType.REPELL):
            out.append(f"(iii) agent {i}: rule {r.rule.name} with {d_minus} negative neighbours")
        row = g.adj[i]
        if r.rule in (RuleType.DEGROOT, RuleType.FJ):
            w = r.theta[: g.n]
            if r.theta.shape[0] != g.n + (r.rule is RuleType.FJ):
                out.append(f"agent {i}: parameter vector has wrong length")
                continue
            if (w < -tol).any() or abs(w.sum() - 1.0) > tol:
                out.append(f"agent {i}: weights are not on the simplex")
            if not np.array_equal(w > tol, row == 1):
                out.append(f"agent {i}: weight support differs from positive neighbours")
            if r.rule is RuleType.FJ:
                lam = r.theta[-1]
                if not eps_lambda - tol <= lam <= 1.0 - eps_lambda + tol:
                    out.append(f"(ii) agent {i}: susceptibility {lam:g} outside [{eps_lambda:g}, {1 - eps_lambda:g}]")
        elif r.rule is RuleType.REPELL:
            w = r.theta
            if w.shape[0] != g.n:
                out.append(f"agent {i}: parameter vector has wrong length")
                continue
            if abs(w.sum() - 1.0) > tol:
                out.append(f"agent {i}: repelling weights do not sum to one")
            off = np.arange(g.n) != i
            if not np.array_equal(np.sign(w[off]), row[off]):
                out.append(f"agent {i}: weight signs differ from the adjacency row")
        else:
            if r.confidence < 0:
                out.append(f"agent {i}: negative confidence bound")
            if not r.confidence < xmax:
                out.append(f"(iv) agent {i}: confidence bound {r.confidence:g} >= max|x(0)| = {xmax:g}")
    return out


# -- model construction ----------------------------------------------------------

def repell_weights(g: SignedGraph, i: int, alpha: float, beta: float) -> np.ndarray:
    """Signed weights of the repelling rule.

    Off-diagonal entries are ``alpha`` on positive and ``-beta`` on negative
    neighbours; the diagonal takes the remainder so the weights sum to one,
    which is what the difference form x_i + alpha*sum(x_j - x_i) - beta*sum(x_j - x_i)
    gives when the self-loop's zero term is dropped.
    """
    row = g.adj[i]
    w = np.where(row == 1, alpha, 0.0) - np.where(row == -1, beta, 0.0)
    w[i] = 0.0
    w[i] = 1.0 - w.sum()
    return w


def uniform_weights(g: SignedGraph, i: int) -> np.ndarray:
    pos = g.adj[i] == 1
    return pos / pos.sum()


@dataclass(frozen=True)
class ModelGenConfig:
    """Parameters of the random mixed model.

    ``counts`` gives the number of agents per rule in the order DeGroot, FJ,
    Repell, HK; agents are labelled contiguously in that order.
    """

    counts: tuple[int, int, int, int] = (5, 5, 5, 5)
    p_link: float | None = None
    strength: float = 0.2
    lam: float = 0.5
    c: float = 0.25
    x0_low: float = -1.0
    x0_high: float = 1.0
    max_retries: int = 10_000
    eps_lambda: float = 0.1
    resample_x0: int = 100

    @property
    def n(self) -> int:
        return int(sum(self.counts))

    def link_probability(self) -> float:
        return default_link_probability(self.n) if self.p_link is None else self.p_link

    def rule_labels(self) -> list[RuleType]:
        return [rule for rule, k in zip(ALL_RULES, self.counts) for _ in range(k)]


def build_model(graph: SignedGraph, rules: Sequence[RuleType], x0: np.ndarray,
                strength: float = 0.2, lam: float = 0.5, c: float = 0.25) -> MixedModel:
    """Attach default parameters to a labelled graph.

    DeGroot and FJ weights are uniform over positive neighbours; repelling
    agents use alpha_i = beta_i = strength / d_i with d_i the total degree.
    """
    agents = []
    for i, rule in enumerate(rules):
        rule = RuleType(rule)
        if rule is RuleType.DEGROOT:
            theta = uniform_weights(graph, i)
        elif rule is RuleType.FJ:
            theta = np.append(uniform_weights(graph, i), lam)
        elif rule is RuleType.REPELL:
            d_plus, d_minus = degrees(graph, i)
            a = strength / (d_plus + d_minus)
            theta = repell_weights(graph, i, a, a)
        else:
            theta = np.array([c])
        agents.append(AgentRule(rule, theta))
    return MixedModel(graph, tuple(agents), x0)


def sample_model(gen: ModelGenConfig, rng: np.random.Generator) -> MixedModel:
    labels = gen.rule_labels()
    repell = frozenset(i for i, r in enumerate(labels) if r is RuleType.REPELL)
    gcfg = GraphGenConfig(gen.n, gen.link_probability(), repell, gen.max_retries)
    graph = generate_mixed_graph(gcfg, rng)
    for _ in range(gen.resample_x0):
        x0 = rng.uniform(gen.x0_low, gen.x0_high, size=gen.n)
        model = build_model(graph, labels, x0, gen.strength, gen.lam, gen.c)
        if not validate_assumptions(model, gen.eps_lambda):
            return model
    raise ModelError("could not draw an initial state satisfying the assumptions")


# -- serialization -------------------------------------------------------------------

def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    n = traj.n
    header = ",".join(f"x{j + 1}" for j in range(n))
    rows = (",".join(format(v, ".17g") for v in row) for row in traj.states)
    Path(path).write_text(header + "\n" + "\n".join(rows) + "\n")


def read_trajectory_csv(path: str | Path) -> Trajectory:
    return Trajectory(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2))
