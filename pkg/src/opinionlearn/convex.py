"""Small dense convex solvers: L1 minimisation (LP) and constrained least squares (QP).

Both solvers work on a :class:`LinearConstraintSet` made of exact linear
equalities, per-coordinate bounds and coordinates pinned to zero. Every
``OPTIMAL`` answer carries a KKT residual that has been checked against
``tol_kkt`` and a feasibility re-check at ``tol_feas``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import _simplex

TOL_FEAS = 1e-8
TOL_KKT = 1e-7


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class SolveStatus:
    status: Status
    kkt_residual: float = float("nan")

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class LinearConstraintSet:
    """Constraints on y in R^dim.

    ``A_eq y = b_eq``, ``lb <= y <= ub`` (entries may be infinite) and
    ``y_j = 0`` for j in ``fixed_zero``.
    """

    dim: int
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    fixed_zero: Iterable[int] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        d = self.dim
        if self.A_eq is None:
            self.A_eq = np.zeros((0, d))
            self.b_eq = np.zeros(0)
        self.A_eq = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
        self.b_eq = np.atleast_1d(np.asarray(self.b_eq, dtype=float))
        if self.A_eq.shape[1] != d or self.A_eq.shape[0] != self.b_eq.shape[0]:
            raise ValueError("A_eq must be (m, dim) and b_eq of length m")
        self.lb = np.full(d, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).copy()
        self.ub = np.full(d, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).copy()
        if self.lb.shape != (d,) or self.ub.shape != (d,):
            raise ValueError("bounds must have length dim")
        self.fixed_zero = tuple(sorted(set(int(j) for j in self.fixed_zero)))

    def fixed_values(self) -> tuple[np.ndarray, np.ndarray]:
        """Mask of pinned coordinates and their values (NaN where free)."""
        fixed = self.lb == self.ub
        vals = np.where(fixed, self.lb, np.nan)
        for j in self.fixed_zero:
            if self.lb[j] > 0 or self.ub[j] < 0:
                vals[j] = np.nan  # contradictory pin, resolved as infeasible later
            else:
                vals[j] = 0.0
            fixed[j] = True
        return fixed, vals

    def residual(self, y: np.ndarray) -> float:
        """Largest violation of any constraint at ``y``."""
        r = 0.0
        if self.A_eq.shape[0]:
            r = float(np.max(np.abs(self.A_eq @ y - self.b_eq)))
        r = max(r, float(np.max(self.lb - y, initial=0.0)), float(np.max(y - self.ub, initial=0.0)))
        if self.fixed_zero:
            r = max(r, float(np.max(np.abs(y[list(self.fixed_zero)]))))
        return r

    def dump(self, path: str | Path, X: np.ndarray | None = None, b: np.ndarray | None = None) -> None:
        """Write the problem data as plain text for offline inspection."""
        def fmt(a):
            return " ".join(format(v, ".17g") for v in np.ravel(a))

        lines = [f"dim {self.dim}"]
        if X is not None:
            X = np.atleast_2d(X)
            lines.append(f"X {X.shape[0]} {X.shape[1]}")
            lines += [fmt(row) for row in X]
            lines.append("b " + fmt(b))
        lines.append(f"A_eq {self.A_eq.shape[0]}")
        lines += [fmt(row) + " | " + format(v, ".17g") for row, v in zip(self.A_eq, self.b_eq)]
        lines.append("lb " + fmt(self.lb))
        lines.append("ub " + fmt(self.ub))
        lines.append("fixed_zero " + " ".join(str(j) for j in self.fixed_zero))
        Path(path).write_text("\n".join(lines) + "\n")


# -- reduced problems --------------------------------------------------------------

@dataclass
class _Reduced:
    free: np.ndarray
    y_fixed: np.ndarray  # full-length vector with pinned values, zeros elsewhere
    E: np.ndarray
    f: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def expand(self, z: np.ndarray) -> np.ndarray:
        y = self.y_fixed.copy()
        y[self.free] = z
        return y


def _reduce(cons: LinearConstraintSet) -> _Reduced | None:
    """Eliminate pinned coordinates; ``None`` if the pins contradict the bounds."""
    fixed, vals = cons.fixed_values()
    if np.isnan(vals[fixed]).any() or (cons.lb > cons.ub).any():
        return None
    y_fixed = np.where(fixed, vals, 0.0)
    free = np.flatnonzero(~fixed)
    E = cons.A_eq[:, free]
    f = cons.b_eq - cons.A_eq @ y_fixed
    return _Reduced(free, y_fixed, E, f, cons.lb[free], cons.ub[free])


def _l1_standard_form(E, f, lb, ub):
    """Rewrite min ||y||_1 over {E y = f, lb <= y <= ub} as min c.z, A z = b, z >= 0.

    Each coordinate becomes y = shift + sum(coef * z_col) over at most two
    nonnegative columns; finite upper limits on a column add a slack row.
    Returns (A, b, c, cols, shift, const) where cols lists (coordinate, coef)
    per z column and const is the objective offset.
    """
    k = lb.shape[0]
    cols: list[tuple[int, float]] = []
    caps: list[float] = []
    shift = np.zeros(k)
    const = 0.0
    for j in range(k):
        lo, hi = lb[j], ub[j]
        if lo >= 0:
            shift[j] = lo
            const += lo
            cols.append((j, 1.0))
            caps.append(hi - lo)
        elif hi <= 0:
            shift[j] = hi
            const -= hi
            cols.append((j, -1.0))
            caps.append(hi - lo)
        else:
            cols.append((j, 1.0))
            caps.append(hi)
            cols.append((j, -1.0))
            caps.append(-lo)
    ncol = len(cols)
    capped = [q for q, cap in enumerate(caps) if np.isfinite(cap)]
    m_eq = E.shape[0]
    nz = ncol + len(capped)
    A = np.zeros((m_eq + len(capped), nz))
    b = np.zeros(m_eq + len(capped))
    for q, (j, coef) in enumerate(cols):
        A[:m_eq, q] = coef * E[:, j]
    b[:m_eq] = f - E @ shift
    for r, q in enumerate(capped):
        A[m_eq + r, q] = 1.0
        A[m_eq + r, ncol + r] = 1.0
        b[m_eq + r] = caps[q]
    c = np.zeros(nz)
    c[:ncol] = 1.0
    return A, b, c, cols, shift, const


def _lp_kkt(A, b, c, basis, z):
    """Primal/dual residual of a basic solution of min c.z, A z = b, z >= 0."""
    N = A.shape[1]
    B = basis[basis < N]
    prim = float(np.max(np.abs(A @ z - b), initial=0.0))
    prim = max(prim, float(np.max(-z, initial=0.0)))
    if B.size:
        pi = np.linalg.lstsq(A[:, B].T, c[B], rcond=None)[0]
    else:
        pi = np.zeros(A.shape[0])
    d = c - A.T @ pi
    dual = float(np.max(-d, initial=0.0))
    comp = float(np.max(np.abs(d * z), initial=0.0))
    return max(prim, dual, comp)


def _orthonormal_rows(E: np.ndarray, f: np.ndarray, tol_feas: float):
    """Equivalent system with orthonormal rows, or ``None`` if ``E y = f`` is inconsistent.

    Trajectory designs are often numerically rank deficient; dependent rows
    would otherwise leave the simplex pivoting on round-off.
    """
    if E.shape[0] == 0:
        return E, f
    U, s, Vt = np.linalg.svd(E, full_matrices=False)
    cutoff = max(E.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    r = int((s > cutoff).sum())
    g = U.T @ f
    # the part of f outside the range of E cannot be matched
    outside = np.linalg.norm(f - U[:, :r] @ g[:r])
    if outside > tol_feas * (1.0 + np.max(np.abs(f), initial=0.0)):
        return None
    return Vt[:r], g[:r] / s[:r]


def _solve_reduced_l1(red: _Reduced, tol_feas: float, tol_kkt: float):
    k = red.lb.shape[0]
    if k == 0:
        r = float(np.max(np.abs(red.f), initial=0.0))
        if r > tol_feas:
            return None, SolveStatus(Status.INFEASIBLE)
        return np.zeros(0), SolveStatus(Status.OPTIMAL, 0.0)
    rows = _orthonormal_rows(red.E, red.f, tol_feas)
    if rows is None:
        return None, SolveStatus(Status.INFEASIBLE)
    A, b, c, cols, shift, _ = _l1_standard_form(*rows, red.lb, red.ub)
    if A.shape[0] == 0:
        z = np.zeros(A.shape[1])
        status, basis = _simplex.OPTIMAL, np.zeros(0, dtype=np.int64)
    else:
        status, basis, z = _simplex.simplex(A, b, c, 1e-10, 1e-9, 50 * (A.shape[0] + A.shape[1]) + 100)
    if status == _simplex.INFEASIBLE:
        return None, SolveStatus(Status.INFEASIBLE)
    if status != _simplex.OPTIMAL:
        return None, SolveStatus(Status.NUMERICAL_FAILURE)
    B = basis[basis < A.shape[1]]
    if B.size:
        # re-solve the basic system directly to shed tableau round-off
        zb = np.linalg.lstsq(A[:, B], b, rcond=None)[0]
        z = np.zeros(A.shape[1])
        z[B] = np.where((zb < 0) & (zb > -1e-9), 0.0, zb)
    kkt = _lp_kkt(A, b, c, basis, z)
    y = shift.copy()
    for q, (j, coef) in enumerate(cols):
        y[j] += coef * z[q]
    return y, SolveStatus(Status.OPTIMAL if kkt <= tol_kkt else Status.NUMERICAL_FAILURE, kkt)


def min_l1(dim: int, cons: LinearConstraintSet, tol_feas: float = TOL_FEAS,
           tol_kkt: float = TOL_KKT) -> tuple[np.ndarray | None, SolveStatus]:
    """Minimise ||y||_1 subject to ``cons``.

    Returns ``(y, status)``; ``y`` is ``None`` unless the status is OPTIMAL.
    The answer is a vertex of the split problem chosen by Bland's rule, so
    ties among several L1 optima are broken deterministically.
    """
    if cons.dim != dim:
        raise ValueError("constraint dimension mismatch")
    red = _reduce(cons)
    if red is None:
        return None, SolveStatus(Status.INFEASIBLE)
    z, st = _solve_reduced_l1(red, tol_feas, tol_kkt)
    if not st.ok:
        return None, st
    y = red.expand(z)
    if cons.residual(y) > tol_feas:
        return None, SolveStatus(Status.NUMERICAL_FAILURE, st.kkt_residual)
    return y, st


def _null_space(M: np.ndarray) -> np.ndarray:
    if M.shape[0] == 0:
        return np.eye(M.shape[1])
    _, s, vt = np.linalg.svd(M)
    rank = int((s > 1e-10 * max(1.0, s[0] if s.size else 0.0)).sum())
    return vt[rank:].T


def _eq_multipliers(E, g, free):
    if E.shape[0] == 0:
        return np.zeros(0)
    rows = E[:, free] if free.any() else E
    rhs = -g[free] if free.any() else -g
    return np.linalg.lstsq(rows.T, rhs, rcond=None)[0]


def constrained_lsq(X: np.ndarray, b: np.ndarray, cons: LinearConstraintSet,
                    tol_feas: float = TOL_FEAS, tol_kkt: float = TOL_KKT,
                    max_iter: int | None = None) -> tuple[np.ndarray | None, SolveStatus]:
    """Minimise ||X y - b||^2 subject to ``cons`` with a primal active-set method.

    The method starts from the minimum-L1 feasible point and takes
    minimum-norm least-squares steps inside the current face, so singular
    ``X^T X`` is handled without regularisation.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    b = np.asarray(b, dtype=float)
    if X.shape[0] != b.shape[0]:
        raise ValueError("X row count must equal len(b)")
    if X.shape[1] != cons.dim:
        raise ValueError("constraint dimension mismatch")
    red = _reduce(cons)
    if red is None:
        return None, SolveStatus(Status.INFEASIBLE)
    y, st = _solve_reduced_l1(red, tol_feas, tol_kkt)
    if y is None:
        return None, st

    Xf = X[:, red.free]
    target = b - X @ red.y_fixed
    E, lb, ub = red.E, red.lb, red.ub
    k = y.shape[0]
    state = np.zeros(k, dtype=np.int8)  # -1 at lower bound, +1 at upper, 0 free
    at_lo = np.isfinite(lb) & (np.abs(y - lb) <= 1e-12)
    at_hi = np.isfinite(ub) & (np.abs(y - ub) <= 1e-12) & ~at_lo
    y[at_lo] = lb[at_lo]
    y[at_hi] = ub[at_hi]
    state[at_lo] = -1
    state[at_hi] = 1
    max_iter = max_iter or 100 + 30 * k

    kkt = np.inf
    face_min = False  # set after an unblocked step: y already minimises on the current face
    for _ in range(max_iter):
        free = state == 0
        res = Xf @ y - target
        p = np.zeros(k)
        if free.any() and not face_min:
            Z = _null_space(E[:, free])
            if Z.shape[1]:
                step = np.linalg.lstsq(Xf[:, free] @ Z, -res, rcond=None)[0]
                p[free] = Z @ step
        if np.max(np.abs(p)) > 1e-12 * (1.0 + np.max(np.abs(y), initial=0.0)):
            alpha, block, side = 1.0, -1, 0
            for j in np.flatnonzero(free):
                if p[j] < 0 and np.isfinite(lb[j]):
                    a = (lb[j] - y[j]) / p[j]
                    if a < alpha:
                        alpha, block, side = a, j, -1
                elif p[j] > 0 and np.isfinite(ub[j]):
                    a = (ub[j] - y[j]) / p[j]
                    if a < alpha:
                        alpha, block, side = a, j, 1
            y = y + max(alpha, 0.0) * p
            if block >= 0:
                state[block] = side
                y[block] = lb[block] if side < 0 else ub[block]
            else:
                face_min = True
            continue
        face_min = False

        g = Xf.T @ res
        nu = _eq_multipliers(E, g, free)
        mu = g + E.T @ nu
        scale = 1.0 + np.max(np.abs(g), initial=0.0)
        viol = np.where(state < 0, -mu, np.where(state > 0, mu, 0.0))
        stat = float(np.max(np.abs(mu[free]), initial=0.0))
        kkt = max(stat, float(np.max(viol, initial=0.0)))
        if np.max(viol, initial=0.0) <= 1e-10 * scale:
            break
        j = int(np.argmax(viol))
        state[j] = 0
        face_min = False
    else:
        return None, SolveStatus(Status.NUMERICAL_FAILURE, float(kkt))

    prim = float(np.max(np.abs(E @ y - red.f), initial=0.0)) if E.shape[0] else 0.0
    prim = max(prim, float(np.max(lb - y, initial=0.0)), float(np.max(y - ub, initial=0.0)))
    kkt = max(kkt, prim)
    full = red.expand(y)
    if kkt > tol_kkt or cons.residual(full) > tol_feas:
        return None, SolveStatus(Status.NUMERICAL_FAILURE, float(kkt))
    return full, SolveStatus(Status.OPTIMAL, float(kkt))
