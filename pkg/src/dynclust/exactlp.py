"""Exact-rational simplex, used as a testing oracle and small-instance fallback.

Same contract as simplex.solve_lp but with fractions.Fraction arithmetic and
pure Bland pivoting: no tolerances, guaranteed termination, exact optima.
Only suitable for small instances (tens of variables).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


# Fraction(float) is exact (binary expansion), so the oracle solves exactly
# the same data the float path sees.
def _to_frac_matrix(A) -> list[list[Fraction]]:
    return [[Fraction(v) for v in row] for row in A]


def _to_frac_vec(v) -> list[Fraction]:
    return [Fraction(x) for x in v]


def solve_lp_exact(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None):
    """Returns (status, x, objective) with x a list of Fractions.

    status is "optimal", "infeasible" or "unbounded".
    """
    c = _to_frac_vec(c)
    n = len(c)
    A: list[list[Fraction]] = []
    b: list[Fraction] = []
    senses: list[str] = []
    if A_ub is not None and len(A_ub) > 0:
        A += _to_frac_matrix(A_ub)
        b += _to_frac_vec(b_ub)
        senses += ["ub"] * len(A_ub)
    if A_eq is not None and len(A_eq) > 0:
        A += _to_frac_matrix(A_eq)
        b += _to_frac_vec(b_eq)
        senses += ["eq"] * len(A_eq)
    m = len(A)
    if m == 0:
        if any(ci < 0 for ci in c):
            return "unbounded", None, None
        return "optimal", [Fraction(0)] * n, Fraction(0)

    for i in range(m):
        if b[i] < 0:
            A[i] = [-v for v in A[i]]
            b[i] = -b[i]
            senses[i] = "flipped_" + senses[i]

    n_slack = sum(1 for s in senses if s.endswith("ub"))
    art_rows = [i for i, s in enumerate(senses) if s in ("eq", "flipped_eq", "flipped_ub")]
    n_art = len(art_rows)
    N = n + n_slack + n_art

    T = [[Fraction(0)] * (N + 1) for _ in range(m)]
    for i in range(m):
        for j in range(n):
            T[i][j] = A[i][j]
        T[i][N] = b[i]
    basis = [-1] * m
    si = 0
    for i, s in enumerate(senses):
        if s.endswith("ub"):
            T[i][n + si] = Fraction(-1) if s.startswith("flipped") else Fraction(1)
            if not s.startswith("flipped"):
                basis[i] = n + si
            si += 1
    for ai, i in enumerate(art_rows):
        T[i][n + n_slack + ai] = Fraction(1)
        basis[i] = n + n_slack + ai

    def pivot(r: int, j: int) -> None:
        pr = T[r]
        piv = pr[j]
        T[r] = [v / piv for v in pr]
        pr = T[r]
        for i in range(m):
            if i != r and T[i][j] != 0:
                f = T[i][j]
                T[i] = [a - f * pb for a, pb in zip(T[i], pr)]
        basis[r] = j

    def reduced_costs(cost: Sequence[Fraction]) -> list[Fraction]:
        z = list(cost)
        for i in range(m):
            cb = cost[basis[i]]
            if cb != 0:
                row = T[i]
                for j in range(N):
                    z[j] -= cb * row[j]
        return z

    def run(cost: list[Fraction], banned: set[int]) -> str:
        while True:
            z = reduced_costs(cost)
            j = next((jj for jj in range(N) if jj not in banned and z[jj] < 0), None)
            if j is None:
                return "optimal"
            best = None
            for i in range(m):
                if T[i][j] > 0:
                    ratio = T[i][N] / T[i][j]
                    if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                        best = (ratio, i)
            if best is None:
                return "unbounded"
            pivot(best[1], j)

    if n_art:
        c1 = [Fraction(0)] * N
        for j in range(n + n_slack, N):
            c1[j] = Fraction(1)
        run(c1, set())
        obj1 = sum(c1[basis[i]] * T[i][N] for i in range(m))
        if obj1 > 0:
            return "infeasible", None, None
        for r in range(m):
            if basis[r] >= n + n_slack:
                j = next((jj for jj in range(n + n_slack) if T[r][jj] != 0), None)
                if j is not None:
                    pivot(r, j)
    banned = set(range(n + n_slack, N))
    c2 = [Fraction(0)] * N
    for j in range(n):
        c2[j] = c[j]
    status = run(c2, banned)
    if status != "optimal":
        return status, None, None
    x = [Fraction(0)] * n
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i][N]
    obj = sum(ci * xi for ci, xi in zip(c, x))
    return "optimal", x, obj
