"""Signed undirected graphs and random generation of mixed-sign networks.

Agents are indexed from 0 in Python. The plain-text edge-list format uses
1-based indices.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np


class GraphGenerationError(RuntimeError):
    """Raised when a valid graph could not be drawn within the retry budget."""


@dataclass(frozen=True)
class SignedGraph:
    """Symmetric adjacency over {-1, 0, +1} with a positive self-loop on every agent."""

    adj: np.ndarray

    def __post_init__(self) -> None:
        adj = np.array(self.adj, dtype=np.int8)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        if not np.isin(adj, (-1, 0, 1)).all():
            raise ValueError("adjacency entries must be in {-1, 0, 1}")
        if not (adj == adj.T).all():
            raise ValueError("adjacency must be symmetric")
        if not (np.diag(adj) == 1).all():
            raise ValueError("every agent needs a positive self-loop")
        adj.setflags(write=False)
        object.__setattr__(self, "adj", adj)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    def positive_neighbors(self, i: int) -> np.ndarray:
        """N_i^+, which contains i itself."""
        return np.flatnonzero(self.adj[i] == 1)

    def negative_neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adj[i] == -1)

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adj[i] != 0)

    def edges(self) -> list[tuple[int, int, int]]:
        """Off-diagonal edges (i, j, sign) with i < j."""
        iu, ju = np.triu_indices(self.n, k=1)
        mask = self.adj[iu, ju] != 0
        return [(int(i), int(j), int(self.adj[i, j])) for i, j in zip(iu[mask], ju[mask])]


@dataclass(frozen=True)
class GraphGenConfig:
    n: int
    p_link: float
    repell_agents: frozenset[int] = field(default_factory=frozenset)
    max_retries: int = 10_000

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0.0 <= self.p_link <= 1.0:
            raise ValueError("p_link must lie in [0, 1]")
        object.__setattr__(self, "repell_agents", frozenset(int(a) for a in self.repell_agents))
        if any(a < 0 or a >= self.n for a in self.repell_agents):
            raise ValueError("repell_agents must be agent indices in [0, n)")
        if self.max_retries < 1:
            raise ValueError("max_retries must be positive")


def default_link_probability(n: int) -> float:
    """Erdos-Renyi link probability 1.1 log(n) / n used by the experiments."""
    if n < 2:
        return 1.0
    return min(1.0, 1.1 * math.log(n) / n)


def _support_connected(support: np.ndarray) -> bool:
    n = support.shape[0]
    if n <= 1:
        return True
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(support[u]):
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return bool(seen.all())


def is_connected(g: SignedGraph) -> bool:
    """Connectivity of the unsigned support graph."""
    return _support_connected(g.adj != 0)


def degrees(g: SignedGraph, i: int) -> tuple[int, int]:
    """Return (d_plus, d_minus) of agent ``i``; the self-loop counts in d_plus."""
    if not 0 <= i < g.n:
        raise IndexError(f"agent index {i} out of range for n={g.n}")
    row = g.adj[i]
    return int((row == 1).sum()), int((row == -1).sum())


def generate_mixed_graph(cfg: GraphGenConfig, rng: np.random.Generator) -> SignedGraph:
    """Draw a connected positive Erdos-Renyi graph plus negative edges among ``repell_agents``.

    Each attempt samples every unordered pair for a positive edge with
    probability ``p_link``, then every pair inside ``repell_agents`` that is
    not already positive for a negative edge with the same probability. The
    attempt is accepted when the positive subgraph is connected and every
    repelling agent has at least one negative edge.
    """
    n = cfg.n
    rep = np.array(sorted(cfg.repell_agents), dtype=int)
    need_negative = rep.size > 0
    if need_negative and rep.size < 2:
        raise GraphGenerationError("a single repelling agent cannot receive a negative edge")
    iu, ju = np.triu_indices(n, k=1)
    ri, rj = np.triu_indices(rep.size, k=1)

    for _ in range(cfg.max_retries):
        adj = np.eye(n, dtype=np.int8)
        pos = rng.random(iu.size) < cfg.p_link
        adj[iu[pos], ju[pos]] = 1
        adj[ju[pos], iu[pos]] = 1
        # always consume the negative draws so the stream layout is fixed
        neg_draw = rng.random(ri.size) < cfg.p_link
        if not _support_connected(adj == 1):
            continue
        if need_negative:
            a, b = rep[ri], rep[rj]
            neg = neg_draw & (adj[a, b] == 0)
            adj[a[neg], b[neg]] = -1
            adj[b[neg], a[neg]] = -1
            if not (adj[rep] == -1).any(axis=1).all():
                continue
        return SignedGraph(adj)
    raise GraphGenerationError(
        f"no valid graph after {cfg.max_retries} attempts (n={n}, p={cfg.p_link:.4g})"
    )


# -- serialization -----------------------------------------------------------

def write_edge_list(g: SignedGraph, path: str | Path) -> None:
    lines = [f"n={g.n}"]
    lines += [f"{i + 1} {j + 1} {s}" for i, j, s in g.edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path: str | Path) -> SignedGraph:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("n="):
        raise ValueError("edge list must start with a header line 'n=<count>'")
    n = int(lines[0][2:])
    adj = np.eye(n, dtype=np.int8)
    for ln in lines[1:]:
        i, j, s = (int(tok) for tok in ln.split())
        if i == j:
            continue
        adj[i - 1, j - 1] = s
        adj[j - 1, i - 1] = s
    return SignedGraph(adj)


def write_adjacency_csv(adj: np.ndarray, path: str | Path) -> None:
    rows = (",".join(str(int(v)) for v in row) for row in np.asarray(adj))
    Path(path).write_text("\n".join(rows) + "\n")


def read_adjacency_csv(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)


def from_edges(n: int, edges: Iterable[tuple[int, int, int]]) -> SignedGraph:
    """Build a graph from 0-based (i, j, sign) triples."""
    adj = np.eye(n, dtype=np.int8)
    for i, j, s in edges:
        adj[i, j] = adj[j, i] = s
    return SignedGraph(adj)
