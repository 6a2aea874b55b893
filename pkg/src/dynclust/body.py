"""Covering/packing bodies and exact weighted-l1 projection onto them.

A Body is the per-step feasible region of the fractional solution:

  covering rows   C x >= 1        (coefficients >= 0, rhs normalized to 1)
  packing rows    P x <= 1        (coefficients >= 0; the projection relaxes
                                   the rhs to 1 + eps)
  coupling pairs  x[a] <= x[b]    (service <= open rows of the facility
                                   formulation, kept in original form)
  fixed_zero      x[i] = 0        (hard-constraint branch used when the
                                   per-step optimum is 0)

project() moves the previous point the minimum weighted l1 distance into the
relaxed body.  The minimizer is an LP over per-coordinate increase/decrease
splits; movement is recomputed from the returned point and counts only
variables with positive weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exactlp import solve_lp_exact
from .simplex import solve_lp

FEAS_TOL = 1e-9
SOLVER_TOL = 1e-7


class BodyError(ValueError):
    pass


class InfeasibleBodyError(RuntimeError):
    def __init__(self, labels):
        self.violated_rows = list(labels)
        super().__init__("infeasible body; violated rows: " + ", ".join(labels))


@dataclass
class Body:
    num_vars: int
    weights: np.ndarray
    cov_A: np.ndarray  # (nc, num_vars)
    pack_A: np.ndarray  # (np, num_vars)
    coupling: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    fixed_zero: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.cov_A = np.zeros((0, self.num_vars)) if len(self.cov_A) == 0 else np.atleast_2d(np.asarray(self.cov_A, dtype=float))
        self.pack_A = np.zeros((0, self.num_vars)) if len(self.pack_A) == 0 else np.atleast_2d(np.asarray(self.pack_A, dtype=float))
        self.coupling = np.asarray(self.coupling, dtype=int).reshape(-1, 2)
        self.fixed_zero = np.asarray(self.fixed_zero, dtype=int)
        if self.weights.shape != (self.num_vars,):
            raise BodyError("weights shape mismatch")
        if (self.weights < 0).any():
            raise BodyError("negative movement weight")
        for name, A in (("covering", self.cov_A), ("packing", self.pack_A)):
            if A.shape[1] != self.num_vars:
                raise BodyError(f"{name} width mismatch")
            if (A < 0).any():
                raise BodyError(f"{name} row with negative coefficient (positive body required)")
        if self.cov_A.shape[0] and (self.cov_A.sum(axis=1) <= 0).any():
            raise BodyError("covering row with empty support")

    def row_labels(self) -> list[str]:
        labels = [f"covering[{i}]" for i in range(self.cov_A.shape[0])]
        labels += [f"packing[{i}]" for i in range(self.pack_A.shape[0])]
        labels += [f"coupling[{i}]" for i in range(self.coupling.shape[0])]
        labels += [f"nonneg[{i}]" for i in range(self.num_vars)]
        labels += [f"fixed_zero[{i}]" for i in self.fixed_zero]
        return labels


@dataclass
class FractionalState:
    """Fractional solution carried across steps."""

    x: np.ndarray
    cumulative_movement: float = 0.0
    t: int = -1


def movement_of(body: Body, prev: np.ndarray, x: np.ndarray) -> float:
    w = body.weights
    return float(np.abs(x - prev)[w > 0] @ w[w > 0])


def check_in_body(body: Body, x: np.ndarray, eps: float, tol: float = 1e-7) -> list[str]:
    """Rows of the (1+eps)-relaxed body violated by x, empty when feasible."""
    bad = []
    if body.cov_A.shape[0]:
        r = body.cov_A @ x
        bad += [f"covering[{i}]" for i in np.flatnonzero(r < 1.0 - tol)]
    if body.pack_A.shape[0]:
        r = body.pack_A @ x
        bad += [f"packing[{i}]" for i in np.flatnonzero(r > (1.0 + eps) + tol)]
    for i, (a, b) in enumerate(body.coupling):
        if x[a] > x[b] + tol:
            bad.append(f"coupling[{i}]")
    bad += [f"nonneg[{i}]" for i in np.flatnonzero(x < -tol)]
    bad += [f"fixed_zero[{i}]" for i in body.fixed_zero if abs(x[i]) > tol]
    return bad


def _movable_vars(body: Body, prev: np.ndarray) -> np.ndarray:
    """Vars that any optimal projection could move; the rest stay at prev.

    A variable at 0 that appears in no covering row and no coupling pair can
    only be raised, which costs movement and packing slack for no benefit.
    """
    mask = prev > 0
    if body.cov_A.shape[0]:
        mask |= body.cov_A.max(axis=0) > 0
    if body.coupling.size:
        mask[body.coupling.ravel()] = True
    mask[body.fixed_zero] = True
    return np.flatnonzero(mask)


def project(
    body: Body,
    prev: np.ndarray,
    eps: float,
    engine: str = "float",
) -> tuple[np.ndarray, float]:
    """Weighted-l1-minimal move of prev into the (1+eps)-relaxed body.

    Returns (x, movement).  Raises InfeasibleBodyError naming the violated
    rows when the relaxed body is empty.  The movement value is unique even
    when the minimizer is not; ties go to the solver's deterministic pivot
    order.
    """
    prev = np.asarray(prev, dtype=float)
    if prev.shape != (body.num_vars,):
        raise BodyError("prev shape mismatch")
    if eps < 0:
        raise BodyError("eps must be >= 0")

    idx = _movable_vars(body, prev)
    k = idx.size
    if k == 0:
        if check_in_body(body, prev, eps):
            raise InfeasibleBodyError(check_in_body(body, prev, eps))
        return prev.copy(), 0.0
    pos = -np.ones(body.num_vars, dtype=int)
    pos[idx] = np.arange(k)

    # variables: p (increase) then q (decrease), both over idx
    w = body.weights[idx]
    c = np.concatenate([w, w])
    rows = []
    rhs = []
    labels = []
    covA = body.cov_A[:, idx] if body.cov_A.shape[0] else np.zeros((0, k))
    for i in range(covA.shape[0]):
        a = covA[i]
        rows.append(np.concatenate([-a, a]))
        rhs.append(float(body.cov_A[i] @ prev) - 1.0)
        labels.append(f"covering[{i}]")
    packA = body.pack_A[:, idx] if body.pack_A.shape[0] else np.zeros((0, k))
    for i in range(packA.shape[0]):
        a = packA[i]
        rows.append(np.concatenate([a, -a]))
        rhs.append((1.0 + eps) - float(body.pack_A[i] @ prev))
        labels.append(f"packing[{i}]")
    for i, (a, b) in enumerate(body.coupling):
        row = np.zeros(2 * k)
        row[pos[a]] += 1.0
        row[k + pos[a]] -= 1.0
        row[pos[b]] -= 1.0
        row[k + pos[b]] += 1.0
        rows.append(row)
        rhs.append(float(prev[b] - prev[a]))
        labels.append(f"coupling[{i}]")
    for j, i in enumerate(idx):
        row = np.zeros(2 * k)
        row[k + j] = 1.0
        row[j] = -1.0
        rows.append(row)
        rhs.append(float(prev[i]))
        labels.append(f"nonneg[{i}]")
    for i in body.fixed_zero:
        row = np.zeros(2 * k)
        row[pos[i]] = 1.0
        row[k + pos[i]] = -1.0
        rows.append(row)
        rhs.append(float(-prev[i]))
        labels.append(f"fixed_zero[{i}]")

    A = np.array(rows)
    b = np.array(rhs)
    if engine == "exact":
        status, xf, _ = solve_lp_exact(list(c), A.tolist(), b.tolist())
        if status == "infeasible":
            raise InfeasibleBodyError(["unknown (exact engine)"])
        if status != "optimal":
            raise RuntimeError(f"projection LP: {status}")
        z = np.array([float(v) for v in xf])
    else:
        res = solve_lp(c, A, b)
        if res.status == "infeasible":
            raise InfeasibleBodyError([labels[i] for i in res.infeasible_rows])
        if res.status != "optimal":
            raise RuntimeError(f"projection LP: {res.status}")
        z = res.x
    x = prev.copy()
    x[idx] = prev[idx] + z[:k] - z[k:]
    np.maximum(x, 0.0, out=x)
    x[body.fixed_zero] = 0.0

    bad = check_in_body(body, x, eps)
    if bad:
        raise RuntimeError(f"projection returned infeasible point; rows {bad}")
    return x, movement_of(body, prev, x)


def check_fl_separation(x: np.ndarray, Y: np.ndarray, tol: float = FEAS_TOL):
    """Separation oracle for the covering-packing reformulation of service rows.

    Feasible iff sum_i min(x_i, y_ij) >= 1 for every client j.  Returns None
    when feasible, else (client, witness) where witness is the most violated
    subset F' = {i : x_i >= y_ij} for the worst client.
    """
    Y = np.atleast_2d(Y)
    margins = np.minimum(Y, x[None, :]).sum(axis=1)
    worst = int(np.argmin(margins)) if margins.size else 0
    if margins.size == 0 or margins[worst] >= 1.0 - tol:
        return None
    witness = np.flatnonzero(x >= Y[worst])
    return worst, witness


def repair_y(x: np.ndarray, Y: np.ndarray, tol: float = FEAS_TOL) -> np.ndarray:
    """Clip service rows to y_ij <= x_i without touching x.

    Valid whenever the covering-packing reformulation holds for (x, Y); the
    clipped rows then still cover every client.  Raises otherwise.
    """
    Y2 = np.minimum(np.atleast_2d(Y), x[None, :])
    short = np.flatnonzero(Y2.sum(axis=1) < 1.0 - tol)
    if short.size:
        raise BodyError(f"cannot repair service rows for clients {short.tolist()}: "
                        "covering-packing feasibility does not hold")
    return Y2
