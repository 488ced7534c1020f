"""Model-agnostic comparison methods: box-constrained least squares (OLS),
sparse exact solutions (SS) and Gaussian-process regression (GPR).

All three work per agent on the augmented design whose rows are
``[x(t), x_i(0)]``, so the anchoring of FJ agents to their initial opinion
is representable by a linear fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .convex import LinearConstraintSet, SolveStatus, constrained_lsq, min_l1
from .dynamics import Trajectory
from .learners import TAU_SUPP

BOX = 2.0
GPR_NOISE = 1e-6


@dataclass(frozen=True)
class AugmentedDesign:
    """Rows ``[x(t), x_i(0)]`` and targets ``x_i(t+1)`` for one agent."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if A.shape[0] == 0 or A.shape[0] != b.shape[0]:
            raise ValueError("design needs at least one row and one target per row")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_trajectory(cls, traj: Trajectory, i: int) -> "AugmentedDesign":
        X = traj.X
        return cls(np.hstack([X, np.full((X.shape[0], 1), traj.x0[i])]), traj.b(i))

    @property
    def dim(self) -> int:
        return self.A.shape[1]


def augment(X, x_i0) -> np.ndarray:
    """Append the anchor column; ``x_i0`` may be a scalar or one value per row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    col = np.broadcast_to(np.asarray(x_i0, dtype=float), X.shape[:1])
    return np.hstack([X, col[:, None]])


def _box(dim: int, **kw) -> LinearConstraintSet:
    return LinearConstraintSet(dim, lb=np.full(dim, -BOX), ub=np.full(dim, BOX), **kw)


def ols_fit(design: AugmentedDesign) -> tuple[np.ndarray | None, SolveStatus]:
    """Least squares over the box [-2, 2]^(n+1)."""
    return constrained_lsq(design.A, design.b, _box(design.dim))


def ss_fit(design: AugmentedDesign) -> tuple[np.ndarray | None, SolveStatus]:
    """Smallest L1 norm solution of ``A y = b`` inside the box; INFEASIBLE if none exists."""
    return min_l1(design.dim, _box(design.dim, A_eq=design.A, b_eq=design.b))


def support_row(y: np.ndarray, n: int, tau: float = TAU_SUPP) -> np.ndarray:
    """Presence row from the first ``n`` coefficients."""
    return (np.abs(np.asarray(y)[:n]) > tau).astype(np.int8)


def median_length_scale(U: np.ndarray) -> float:
    """Median pairwise distance of the rows of ``U``; 1 when it is zero or undefined."""
    U = np.atleast_2d(U)
    if U.shape[0] < 2:
        return 1.0
    ell = float(np.median(pdist(U)))
    return ell if ell > 0 else 1.0


def rbf_kernel(U: np.ndarray, V: np.ndarray, ell: float) -> np.ndarray:
    d2 = np.sum(U**2, 1)[:, None] + np.sum(V**2, 1)[None, :] - 2.0 * U @ V.T
    return np.exp(-np.maximum(d2, 0.0) / (2.0 * ell * ell))


@dataclass
class GPRModel:
    """Zero-mean GP posterior mean with a squared-exponential kernel."""

    U: np.ndarray
    alpha: np.ndarray
    ell: float

    @classmethod
    def fit(cls, U, y, ell: float | None = None, noise: float = GPR_NOISE) -> "GPRModel":
        U = np.atleast_2d(np.asarray(U, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        if U.shape[0] == 0:
            raise ValueError("GPR needs at least one training pair")
        if noise <= 0:
            raise ValueError("noise variance must be positive")
        ell = median_length_scale(U) if ell is None else float(ell)
        K = rbf_kernel(U, U, ell) + noise * np.eye(U.shape[0])
        # K is symmetric positive definite for noise > 0
        L = np.linalg.cholesky(K)
        alpha = np.linalg.solve(L.T, np.linalg.solve(L, y))
        return cls(U, alpha, ell)

    def predict(self, V) -> np.ndarray:
        V = np.atleast_2d(np.asarray(V, dtype=float))
        return rbf_kernel(V, self.U, self.ell) @ self.alpha


def gpr_fit_predict(design: AugmentedDesign, queries, ell: float | None = None,
                    noise: float = GPR_NOISE) -> np.ndarray:
    return GPRModel.fit(design.A, design.b, ell, noise).predict(queries)


@dataclass
class LinearBaseline:
    """Per-agent coefficient vectors on the augmented design; failed agents hold ``None``.

    ``fallbacks`` lists agents whose sparse fit was infeasible and that use
    the box least-squares fit instead.
    """

    coefs: list[np.ndarray | None]
    statuses: list[SolveStatus]
    fallbacks: list[int] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.coefs)

    @property
    def failures(self) -> int:
        return sum(1 for c in self.coefs if c is None)

    def adjacency(self, tau: float = TAU_SUPP) -> np.ndarray:
        n = self.n
        A = np.zeros((n, n), dtype=np.int8)
        for i, y in enumerate(self.coefs):
            if y is not None:
                A[i] = support_row(y, n, tau)
        return A

    def predict(self, x, x0) -> np.ndarray:
        """One-step prediction; failed agents predict no change."""
        x = np.asarray(x, dtype=float)
        out = x.copy()
        for i, y in enumerate(self.coefs):
            if y is not None:
                out[i] = x @ y[:-1] + x0[i] * y[-1]
        return out


def fit_linear(traj: Trajectory, method: str, fallback: bool = True) -> LinearBaseline:
    """``method`` is ``"ols"`` or ``"ss"``; fits every agent on all pairs of ``traj``.

    With ``fallback``, an agent whose sparse fit has no exact solution in the
    box gets the box least-squares fit.
    """
    fit = {"ols": ols_fit, "ss": ss_fit}[method]
    coefs, statuses, fallbacks = [], [], []
    for i in range(traj.n):
        design = AugmentedDesign.from_trajectory(traj, i)
        y, st = fit(design)
        if not st.ok and method == "ss" and fallback:
            y, st = ols_fit(design)
            fallbacks.append(i)
        coefs.append(y if st.ok else None)
        statuses.append(st)
    return LinearBaseline(coefs, statuses, fallbacks)


@dataclass
class GPRBaseline:
    models: list[GPRModel]

    @classmethod
    def fit(cls, traj: Trajectory, noise: float = GPR_NOISE) -> "GPRBaseline":
        return cls([GPRModel.fit(AugmentedDesign.from_trajectory(traj, i).A, traj.b(i), noise=noise)
                    for i in range(traj.n)])

    def predict(self, x, x0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([m.predict(augment(x[None, :], x0[i]))[0] for i, m in enumerate(self.models)])
