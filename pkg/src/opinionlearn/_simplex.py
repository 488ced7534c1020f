"""Dense two-phase tableau simplex, compiled with numba.

Solves  min c.z  s.t.  A z = b,  z >= 0  for small dense problems. Pivoting
uses Bland's rule (lowest-index entering column, lowest-index leaving basic
variable among ratio ties), so results are reproducible and cycling cannot
occur.
"""

import numpy as np
from numba import njit

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3


@njit(cache=True)
def _pivot(tab, basis, r, j):
    m1, w = tab.shape
    p = tab[r, j]
    for k in range(w):
        tab[r, k] /= p
    for q in range(m1):
        if q != r:
            f = tab[q, j]
            if f != 0.0:
                for k in range(w):
                    tab[q, k] -= f * tab[r, k]
                tab[q, j] = 0.0
    tab[r, j] = 1.0
    basis[r] = j


@njit(cache=True)
def _run(tab, basis, allowed, m, max_iter, tol):
    """Bland-rule iterations on the objective row ``m``. Returns a status code."""
    w = tab.shape[1]
    rhs = w - 1
    for _ in range(max_iter):
        enter = -1
        for j in range(rhs):
            if allowed[j] and tab[m, j] < -tol:
                enter = j
                break
        if enter < 0:
            return OPTIMAL
        leave = -1
        best = np.inf
        for r in range(m):
            a = tab[r, enter]
            if a > tol:
                ratio = tab[r, rhs] / a
                if ratio < best - 1e-12 or (abs(ratio - best) <= 1e-12 and basis[r] < basis[leave]):
                    best = ratio
                    leave = r
        if leave < 0:
            return UNBOUNDED
        _pivot(tab, basis, leave, enter)
    return ITERATION_LIMIT


@njit(cache=True)
def simplex(A, b, c, tol, feas_tol, max_iter):
    """Two-phase simplex.

    Returns ``(status, basis, z)``. Rows found redundant during phase 1 keep an
    artificial at zero in the basis; those basis entries are >= A.shape[1].
    """
    m, N = A.shape
    w = N + m + 1
    tab = np.zeros((m + 1, w))
    scale = 1.0
    for r in range(m):
        sgn = -1.0 if b[r] < 0 else 1.0
        for k in range(N):
            tab[r, k] = sgn * A[r, k]
        tab[r, N + r] = 1.0
        tab[r, w - 1] = sgn * b[r]
        scale = max(scale, abs(b[r]))
    basis = np.empty(m, dtype=np.int64)
    for r in range(m):
        basis[r] = N + r
    for k in range(N):
        s = 0.0
        for r in range(m):
            s += tab[r, k]
        tab[m, k] = -s
    s = 0.0
    for r in range(m):
        s += tab[r, w - 1]
    tab[m, w - 1] = -s

    allowed = np.ones(w - 1, dtype=np.bool_)
    status = _run(tab, basis, allowed, m, max_iter, tol)
    z = np.zeros(N)
    if status != OPTIMAL:
        return ITERATION_LIMIT, basis, z
    if -tab[m, w - 1] > feas_tol * scale:
        return INFEASIBLE, basis, z

    # drive artificials out of the basis where possible
    for r in range(m):
        if basis[r] >= N:
            for k in range(N):
                if abs(tab[r, k]) > 1e-9:
                    _pivot(tab, basis, r, k)
                    break

    for k in range(N, N + m):
        allowed[k] = False
    for k in range(w):
        tab[m, k] = 0.0
    for k in range(N):
        tab[m, k] = c[k]
    for r in range(m):
        j = basis[r]
        if j < N and c[j] != 0.0:
            f = c[j]
            for k in range(w):
                tab[m, k] -= f * tab[r, k]
    status = _run(tab, basis, allowed, m, max_iter, tol)
    for r in range(m):
        if basis[r] < N:
            z[basis[r]] = tab[r, w - 1]
    return status, basis, z
