"""Two-phase dense-tableau simplex with Bland's rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None
    fun: float | None
    iterations: int


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    rows = np.flatnonzero(col)
    cols = np.flatnonzero(T[r])
    if len(rows) and len(cols):
        T[np.ix_(rows, cols)] -= np.outer(col[rows], T[r, cols])


def _run(T: np.ndarray, basis: list, ncols: int, tol: float, max_iter: int) -> tuple[str, int]:
    """Minimise the objective held in the last row over the first ``ncols`` columns."""
    it = 0
    while it < max_iter:
        reduced = T[-1, :ncols]
        entering = next((j for j in range(ncols) if reduced[j] < -tol), None)
        if entering is None:
            return OPTIMAL, it
        col = T[:-1, entering]
        rows = np.flatnonzero(col > tol)
        if len(rows) == 0:
            return UNBOUNDED, it
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        leave = min(ties, key=lambda i: basis[i])
        _pivot(T, leave, entering)
        basis[leave] = entering
        it += 1
    raise RuntimeError("simplex iteration limit reached")


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None, tol: float = 1e-9,
            max_iter: int = 100_000) -> LpResult:
    """Minimise ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq`` and box bounds.

    Bounds default to ``[0, inf)``; finite lower bounds are shifted out and
    finite upper bounds become extra rows.
    """
    c = np.asarray(c, dtype=float)
    n = len(c)
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    bounds = bounds or [(0.0, None)] * n
    lb = np.array([0.0 if b[0] is None else b[0] for b in bounds], dtype=float)
    if np.any(~np.isfinite(lb)):
        raise ValueError("free variables are not supported")
    ub = np.array([np.inf if b[1] is None else b[1] for b in bounds], dtype=float)
    if np.any(ub < lb - tol):
        return LpResult(INFEASIBLE, None, None, 0)

    # shift x = lb + y, y >= 0
    b_ub = b_ub - A_ub @ lb
    b_eq = b_eq - A_eq @ lb
    fin = np.flatnonzero(np.isfinite(ub))
    if len(fin):
        extra = np.zeros((len(fin), n))
        extra[np.arange(len(fin)), fin] = 1.0
        A_ub = np.vstack([A_ub, extra])
        b_ub = np.concatenate([b_ub, ub[fin] - lb[fin]])

    m_ub, m_eq = len(b_ub), len(b_eq)
    m = m_ub + m_eq
    # columns: y (n) | slacks (m_ub) | artificials (m) | rhs
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1
    b = np.where(neg, -b, b)

    nv = n + m_ub
    T = np.zeros((m + 1, nv + m + 1))
    T[:m, :nv] = A
    T[:m, nv:nv + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(nv, nv + m))
    # a slack whose row kept its sign can start in the basis
    for i in range(m_ub):
        if not neg[i]:
            basis[i] = n + i
    T[:m, nv:nv + m] = 0.0
    for i, j in enumerate(basis):
        T[i, j] = 1.0
    art = [i for i, j in enumerate(basis) if j >= nv]

    # phase 1: minimise the sum of artificials
    T[-1] = 0.0
    for i in art:
        T[-1, nv + i] = 1.0
    for i in art:
        T[-1] -= T[i]
    status, it1 = _run(T, basis, nv + m, tol, max_iter)
    if T[-1, -1] < -1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
        return LpResult(INFEASIBLE, None, None, it1)
    # drive remaining artificials out of the basis
    for i, j in enumerate(basis):
        if j >= nv:
            cand = np.flatnonzero(np.abs(T[i, :nv]) > tol)
            if len(cand):
                _pivot(T, i, int(cand[0]))
                basis[i] = int(cand[0])
    keep_rows = [i for i, j in enumerate(basis) if j < nv]
    T = np.vstack([T[keep_rows][:, list(range(nv)) + [T.shape[1] - 1]], np.zeros(nv + 1)])
    basis = [basis[i] for i in keep_rows]

    # phase 2
    T[-1, :n] = c
    for i, j in enumerate(basis):
        if T[-1, j] != 0.0:
            T[-1] -= T[-1, j] * T[i]
    status, it2 = _run(T, basis, nv, tol, max_iter)
    if status == UNBOUNDED:
        return LpResult(UNBOUNDED, None, None, it1 + it2)
    y = np.zeros(nv)
    for i, j in enumerate(basis):
        y[j] = T[i, -1]
    x = lb + y[:n]
    return LpResult(OPTIMAL, x, float(c @ x), it1 + it2)
