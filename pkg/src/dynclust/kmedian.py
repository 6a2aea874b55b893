"""Online rounding for the k-median objective.

Runs the facility rounding with all opening costs zero over the
budget-constrained fractional solution, then enforces the center-count
ceiling alpha * (1+eps) * k implied by disjoint balls each holding at least
1/alpha of the capped mass.
"""

from __future__ import annotations

import numpy as np

from .facility import FacilitySolution, step_facility
from .kcenter import Event, StateCorruptionError
from .metric import MetricSpace, PointRole


def step_kmedian(ms: MetricSpace, roles: PointRole, sol: FacilitySolution,
                 x_t: np.ndarray, Y_t: np.ndarray, clients, t: int, k: int,
                 eps: float) -> list[Event]:
    """step_facility at zero opening cost, plus the count bound."""
    zero_roles = PointRole(roles.facilities, np.zeros(roles.facilities.size))
    events = step_facility(ms, zero_roles, sol, x_t, Y_t, clients, t)
    cap = sol.params.alpha * (1.0 + eps) * k
    if len(sol.active) > cap + 1e-9:
        raise StateCorruptionError(
            f"center count {len(sol.active)} exceeds alpha * k' = {cap}", sol)
    return events


def kmedian_objective(ms: MetricSpace, roles: PointRole, sol: FacilitySolution,
                      clients) -> float:
    """Total client-to-nearest-open-center distance."""
    clients = np.asarray(clients, dtype=int)
    if clients.size == 0 or not sol.active:
        return 0.0
    open_pts = np.array([roles.facilities[pos] for pos in sol.open_positions()])
    return float(ms.dist[np.ix_(clients, open_pts)].min(axis=1).sum())
