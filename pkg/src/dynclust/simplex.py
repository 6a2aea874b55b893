"""Dense two-phase simplex for the small linear programs used in this package.

Solves  min c.x  subject to  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.

Every per-step solve in this package is a few hundred rows and columns, so a
single dense tableau is enough; no basis factorization machinery.  Pivoting
uses Dantzig's rule and switches to Bland's rule after a run of degenerate
pivots, which guarantees termination.  Ties in the ratio test break toward
the lowest row index, so solves are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-9
RATIO_TOL = 1e-10
PHASE1_TOL = 1e-7
DEGENERATE_RUN = 40


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "maxiter"
    x: np.ndarray | None = None
    objective: float | None = None
    # Constraint rows (in caller order: ub rows then eq rows) that could not be
    # satisfied, populated when status == "infeasible".
    infeasible_rows: list[int] = field(default_factory=list)
    iterations: int = 0


def _pivot(T: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= col[:, None] * T[r]
    # kill roundoff in the pivot column
    T[:, j] = 0.0
    T[r, j] = 1.0


def _run_simplex(T, basis, cost, allowed, maxiter, tol):
    """Minimize cost over the current tableau. Returns (status, iterations)."""
    m = T.shape[0]
    bland = False
    degen_run = 0
    for it in range(maxiter):
        z = cost - cost[basis] @ T[:, :-1]
        z[~allowed] = 0.0
        if bland:
            neg = np.flatnonzero(z < -tol)
            if neg.size == 0:
                return "optimal", it
            j = int(neg[0])
        else:
            j = int(np.argmin(z))
            if z[j] >= -tol:
                return "optimal", it
        col = T[:, j]
        pos = col > RATIO_TOL
        if not pos.any():
            return "unbounded", it
        ratios = np.full(m, np.inf)
        # floor the numerator at 0: a roundoff-negative rhs entry must force
        # a degenerate repair pivot, not a negative ratio that walks the
        # basis out of the feasible region
        ratios[pos] = np.maximum(T[pos, -1], 0.0) / col[pos]
        rmin = ratios.min()
        cand = np.flatnonzero(ratios <= rmin + RATIO_TOL)
        if bland and cand.size > 1:
            r = int(cand[np.argmin(basis[cand])])
        else:
            r = int(cand[0])
        if rmin <= RATIO_TOL:
            degen_run += 1
            if degen_run >= DEGENERATE_RUN:
                bland = True
        else:
            degen_run = 0
        _pivot(T, r, j)
        basis[r] = j
    return "maxiter", maxiter


def solve_lp(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    maxiter: int | None = None,
    tol: float = PIVOT_TOL,
) -> LPResult:
    """Solve min c.x s.t. A_ub x <= b_ub, A_eq x = b_eq, x >= 0.

    Returns an LPResult; on "infeasible" the infeasible_rows field names the
    rows (caller order, ub block first) whose artificials stayed basic.
    """
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    blocks = []
    rhs = []
    senses = []
    if A_ub is not None and len(A_ub) > 0:
        A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
        blocks.append(A_ub)
        rhs.append(np.asarray(b_ub, dtype=float))
        senses += ["ub"] * A_ub.shape[0]
    if A_eq is not None and len(A_eq) > 0:
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
        blocks.append(A_eq)
        rhs.append(np.asarray(b_eq, dtype=float))
        senses += ["eq"] * A_eq.shape[0]
    if not blocks:
        # unconstrained nonnegative minimization
        x = np.zeros(n)
        if (c < -tol).any():
            return LPResult("unbounded")
        return LPResult("optimal", x, 0.0)

    A = np.vstack(blocks)
    b = np.concatenate(rhs)
    m = A.shape[0]
    flip = b < 0
    A[flip] *= -1.0
    b = np.where(flip, -b, b)

    n_slack = sum(1 for s in senses if s == "ub")
    # slack sign: +1 for an un-flipped ub row, -1 for a flipped one
    art_rows = [i for i, s in enumerate(senses) if s == "eq" or flip[i]]
    n_art = len(art_rows)

    N = n + n_slack + n_art
    T = np.zeros((m, N + 1))
    T[:, :n] = A
    T[:, -1] = b
    basis = np.empty(m, dtype=int)
    si = 0
    for i, s in enumerate(senses):
        if s == "ub":
            T[i, n + si] = -1.0 if flip[i] else 1.0
            if not flip[i]:
                basis[i] = n + si
            si += 1
    for ai, i in enumerate(art_rows):
        T[i, n + n_slack + ai] = 1.0
        basis[i] = n + n_slack + ai

    allowed = np.ones(N, dtype=bool)
    total_it = 0
    if n_art:
        c1 = np.zeros(N)
        c1[n + n_slack :] = 1.0
        status, it = _run_simplex(T, basis, c1, allowed, maxiter or 50 * (m + N), tol)
        total_it += it
        if status == "maxiter":
            return LPResult("maxiter", iterations=total_it)
        p1 = c1[basis] @ T[:, -1]
        if p1 > PHASE1_TOL:
            rows = [
                art_rows[basis[r] - n - n_slack]
                for r in range(m)
                if basis[r] >= n + n_slack and T[r, -1] > PHASE1_TOL
            ]
            return LPResult("infeasible", infeasible_rows=sorted(rows), iterations=total_it)
        # drive leftover artificials out of the basis where possible,
        # pivoting on the best-conditioned column
        for r in range(m):
            if basis[r] >= n + n_slack:
                row = T[r, : n + n_slack]
                j = int(np.argmax(np.abs(row)))
                if abs(row[j]) > tol:
                    _pivot(T, r, j)
                    basis[r] = j
        allowed[n + n_slack :] = False
        # clip rhs noise inherited from phase 1 so phase 2 starts feasible
        rhs_col = T[:, -1]
        rhs_col[(rhs_col < 0.0) & (rhs_col >= -PHASE1_TOL)] = 0.0

    c2 = np.zeros(N)
    c2[:n] = c
    status, it = _run_simplex(T, basis, c2, allowed, maxiter or 50 * (m + N), tol)
    total_it += it
    if status != "optimal":
        return LPResult(status, iterations=total_it)
    x = np.zeros(N)
    x[basis] = T[:, -1]
    x = x[:n]
    np.maximum(x, 0.0, out=x)
    return LPResult("optimal", x, float(c @ x), iterations=total_it)


def lp_feasible(A_ub=None, b_ub=None, A_eq=None, b_eq=None, n: int | None = None) -> LPResult:
    """Phase-1 style feasibility check; returns an arbitrary feasible point."""
    if n is None:
        if A_ub is not None and len(A_ub) > 0:
            n = np.atleast_2d(np.asarray(A_ub)).shape[1]
        else:
            n = np.atleast_2d(np.asarray(A_eq)).shape[1]
    return solve_lp(np.zeros(n), A_ub, b_ub, A_eq, b_eq)
