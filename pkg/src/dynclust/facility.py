"""Online rounding for facility location.

Active clients carry disjoint balls in facility space, each associated with
a cheapest in-ball facility; the open set is exactly those facilities.
Activation radius is gamma times the client's current fractional service
cost.  Event accounting mirrors the center rounding, with the add-with-drop
bound asserted through the radius ratio of the separation lemma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kcenter import EVENT_TOL, KEEP_TOL, Event, StateCorruptionError
from .metric import MetricSpace, PointRole

ALPHA_FL = 11.0
DELTA_FL = 2.0
GAMMA_FL = 10.0 / 9.0
# eta solves 2**(1/eta) = (alpha - gamma*(1+delta)) / (2*gamma) = 69/20
ETA_FL = 1.0 / math.log2((ALPHA_FL - GAMMA_FL * (1.0 + DELTA_FL)) / (2.0 * GAMMA_FL))
KAPPA_FL = 1.0 / (1.0 - 1.0 / GAMMA_FL - 1.0 / ALPHA_FL)  # = 110


@dataclass
class FacilityParams:
    alpha: float = ALPHA_FL
    delta: float = DELTA_FL
    gamma: float = GAMMA_FL
    eta: float = ETA_FL

    @property
    def kappa(self) -> float:
        return 1.0 / (1.0 - 1.0 / self.gamma - 1.0 / self.alpha)

    @property
    def ratio(self) -> float:
        """Radius growth factor 2**(1/eta) between conflicting balls."""
        return (self.alpha - self.gamma * (1.0 + self.delta)) / (2.0 * self.gamma)


@dataclass
class ActiveClient:
    client: int       # point index
    radius: float     # gamma times the service cost at birth
    born: int
    fac_pos: int      # position into roles.facilities


@dataclass
class FacilitySolution:
    params: FacilityParams = field(default_factory=FacilityParams)
    active: list[ActiveClient] = field(default_factory=list)
    n1: int = 0
    n2: int = 0
    x_prev: np.ndarray | None = None

    def open_positions(self) -> list[int]:
        return [a.fac_pos for a in self.active]


def fractional_service_cost(ms: MetricSpace, roles: PointRole, j: int,
                            y_row: np.ndarray) -> float:
    """Distance-weighted service mass of one client."""
    return float(ms.dist[j, roles.facilities] @ y_row)


def client_ball(ms: MetricSpace, roles: PointRole, j: int, radius: float) -> np.ndarray:
    """Facility positions within the client's ball (closed, 1e-9)."""
    return np.flatnonzero(ms.dist[j, roles.facilities] <= radius + KEEP_TOL)


def potential_facility(ms: MetricSpace, roles: PointRole, sol: FacilitySolution,
                       x: np.ndarray) -> float:
    """kappa (1 + eta log2 Delta) times the mass deficits below 1 - 1/gamma,
    minus eta times summed log2(Delta / r) with radii clamped to [1, Delta]."""
    p = sol.params
    delta_m = ms.delta
    scale = p.kappa * (1.0 + p.eta * math.log2(max(delta_m, 1.0)))
    val = 0.0
    for a in sol.active:
        mass = float(x[client_ball(ms, roles, a.client, a.radius)].sum())
        deficit = max(0.0, 1.0 - 1.0 / p.gamma - mass)
        r = min(max(a.radius, 1.0), delta_m)
        val += scale * deficit - p.eta * math.log2(delta_m / r)
    return val


def check_onedrop_fl(ms: MetricSpace, sol: FacilitySolution, j: int,
                     r_new: float) -> list[int]:
    """Active entries violating separation against the activating client;
    proven to hold at most one, with radius at least ratio times r_new."""
    p = sol.params
    conflicts = []
    for idx, a in enumerate(sol.active):
        need = a.radius + r_new + p.delta * min(a.radius, r_new)
        if ms.dist[j, a.client] < need - KEEP_TOL:
            conflicts.append(idx)
    if len(conflicts) > 1:
        raise StateCorruptionError(
            f"more than one active client conflicts with {j}", sol)
    if conflicts:
        r_i = sol.active[conflicts[0]].radius
        if r_i <= p.ratio * r_new - KEEP_TOL:
            raise StateCorruptionError(
                f"conflicting radius {r_i} not above {p.ratio * r_new}", sol)
    return conflicts


def _uncovered(ms: MetricSpace, roles: PointRole, sol: FacilitySolution,
               clients: np.ndarray, R: np.ndarray) -> list[int]:
    p = sol.params
    open_pts = [roles.facilities[pos] for pos in sol.open_positions()]
    out = []
    for idx, j in enumerate(clients):
        if not open_pts or min(ms.dist[j, i] for i in open_pts) > p.alpha * R[idx] + KEEP_TOL:
            out.append(idx)
    return out


def check_invariants_facility(ms: MetricSpace, roles: PointRole,
                              sol: FacilitySolution, x: np.ndarray,
                              clients: np.ndarray, R: np.ndarray) -> None:
    p = sol.params
    f = roles.opening_cost
    bad = _uncovered(ms, roles, sol, clients, R)
    if bad:
        raise StateCorruptionError(
            f"service invariant fails for clients {clients[bad].tolist()}", sol)
    for a_i in range(len(sol.active)):
        for b_i in range(a_i + 1, len(sol.active)):
            a, b = sol.active[a_i], sol.active[b_i]
            need = a.radius + b.radius + p.delta * min(a.radius, b.radius)
            if ms.dist[a.client, b.client] < need - KEEP_TOL:
                raise StateCorruptionError(
                    f"separation fails for active {a.client}, {b.client}", sol)
    seen: set[int] = set()
    for a in sol.active:
        members = client_ball(ms, roles, a.client, a.radius)
        if float(x[members].sum()) < 1.0 / p.alpha - KEEP_TOL:
            raise StateCorruptionError(f"mass fails at active {a.client}", sol)
        if a.fac_pos not in members:
            raise StateCorruptionError(
                f"associated facility left the ball of {a.client}", sol)
        if f[a.fac_pos] > f[members].min() + KEEP_TOL:
            raise StateCorruptionError(
                f"associated facility of {a.client} is not min-cost", sol)
        overlap = seen.intersection(members.tolist())
        if overlap:
            raise StateCorruptionError(
                f"active balls overlap on facilities {sorted(overlap)}", sol)
        seen.update(members.tolist())


def check_objective_split(ms: MetricSpace, roles: PointRole, sol: FacilitySolution,
                          x: np.ndarray, clients: np.ndarray, R: np.ndarray) -> None:
    """Service and opening bounded separately by alpha times their
    fractional counterparts."""
    p = sol.params
    f = roles.opening_cost
    if clients.size:
        open_pts = np.array([roles.facilities[pos] for pos in sol.open_positions()])
        service = float(ms.dist[np.ix_(clients, open_pts)].min(axis=1).sum()) \
            if open_pts.size else 0.0
        frac_service = float(R.sum())
        if service > p.alpha * frac_service + 1e-6 * (1.0 + frac_service):
            raise StateCorruptionError(
                f"service {service} exceeds alpha x fractional {frac_service}", sol)
    opening = float(sum(f[a.fac_pos] for a in sol.active))
    frac_opening = float(f @ x)
    if opening > p.alpha * frac_opening + 1e-6 * (1.0 + frac_opening):
        raise StateCorruptionError(
            f"opening {opening} exceeds alpha x fractional {frac_opening}", sol)


def _loop_guard_fl(params: FacilityParams, delta_m: float, total_mass: float,
                   n_clients: int) -> int:
    cap = math.ceil(params.alpha * (total_mass + 1.0))
    log_term = math.ceil(math.log2(max(delta_m, 2.0)) / min(1.0, params.eta))
    return cap * (4 * log_term + 2) + n_clients + 8


def step_facility(ms: MetricSpace, roles: PointRole, sol: FacilitySolution,
                  x_t: np.ndarray, Y_t: np.ndarray, clients, t: int) -> list[Event]:
    """One rounding step over the fractional pair (x, Y); returns events.

    Order: fractional-move accounting, low-mass drops (ascending client
    index), then activation of unserved clients (lowest index first) with at
    most one separation drop each.
    """
    p = sol.params
    clients = np.asarray(sorted(clients), dtype=int)
    x_t = np.asarray(x_t, dtype=float)
    Y_t = np.atleast_2d(np.asarray(Y_t, dtype=float)) if clients.size else \
        np.zeros((0, roles.facilities.size))
    R = np.array([fractional_service_cost(ms, roles, j, Y_t[idx])
                  for idx, j in enumerate(clients)])
    events: list[Event] = []
    if sol.x_prev is None:
        sol.x_prev = np.zeros_like(x_t)
    delta_m = ms.delta
    move_scale = p.kappa * (1.0 + p.eta * math.log2(max(delta_m, 1.0)))

    phi_before = potential_facility(ms, roles, sol, sol.x_prev)
    phi = potential_facility(ms, roles, sol, x_t)
    in_ball = np.zeros(roles.facilities.size, dtype=bool)
    for a in sol.active:
        in_ball[client_ball(ms, roles, a.client, a.radius)] = True
    moved = float(np.abs(x_t - sol.x_prev)[in_ball].sum())
    if phi - phi_before > move_scale * moved + EVENT_TOL:
        raise StateCorruptionError(
            f"fractional-move potential jump {phi - phi_before} exceeds "
            f"{move_scale * moved}", sol)

    for a in sorted(sol.active, key=lambda a: a.client):
        mass = float(x_t[client_ball(ms, roles, a.client, a.radius)].sum())
        if mass < 1.0 / p.alpha - KEEP_TOL:
            sol.active.remove(a)
            sol.n1 += 1
            events.append(Event(t, "DROP", a.client, "LOW_MASS",
                                facility=int(roles.facilities[a.fac_pos])))
            phi_new = potential_facility(ms, roles, sol, x_t)
            if 1.0 + (phi_new - phi) > EVENT_TOL:
                raise StateCorruptionError(
                    f"low-mass drop accounting fails at {a.client}: "
                    f"1 + dPhi = {1.0 + phi_new - phi}", sol)
            phi = phi_new

    guard = _loop_guard_fl(p, delta_m, float(x_t.sum()), clients.size)
    iters = 0
    while True:
        todo = _uncovered(ms, roles, sol, clients, R)
        if not todo:
            break
        iters += 1
        if iters > guard:
            raise StateCorruptionError(
                f"activation loop exceeded its {guard}-iteration guard", sol)
        idx = todo[0]
        j = int(clients[idx])
        r_j = p.gamma * float(R[idx])
        conflicts = check_onedrop_fl(ms, sol, j, r_j)
        members = client_ball(ms, roles, j, r_j)
        birth = float(x_t[members].sum())
        if birth < 1.0 - 1.0 / p.gamma - KEEP_TOL:
            raise StateCorruptionError(
                f"birth mass {birth} below 1 - 1/gamma at client {j}", sol)
        if members.size == 0:
            raise StateCorruptionError(
                f"no facility within radius {r_j} of activating client {j}", sol)
        costs = roles.opening_cost[members]
        fac_pos = int(members[int(np.argmin(costs))])  # argmin takes lowest index on ties
        dropped = [sol.active[i] for i in conflicts]
        for a in dropped:
            sol.active.remove(a)
            sol.n2 += 1
            events.append(Event(t, "DROP", a.client, "SEPARATION",
                                facility=int(roles.facilities[a.fac_pos])))
        sol.active.append(ActiveClient(j, r_j, t, fac_pos))
        events.append(Event(t, "ACTIVATE", j,
                            facility=int(roles.facilities[fac_pos])))
        phi_new = potential_facility(ms, roles, sol, x_t)
        if dropped:
            r_i = dropped[0].radius
            if r_j > 0.0 and 1.0 - p.eta * math.log2(r_i / r_j) > EVENT_TOL:
                raise StateCorruptionError(
                    f"add-with-drop ratio bound fails: r_i={r_i}, r_j={r_j}", sol)
        else:
            if phi_new - phi > EVENT_TOL:
                raise StateCorruptionError(
                    f"activation raised the potential at {j}: dPhi = "
                    f"{phi_new - phi}", sol)
        phi = phi_new

    check_invariants_facility(ms, roles, sol, x_t, clients, R)
    check_objective_split(ms, roles, sol, x_t, clients, R)
    sol.x_prev = x_t.copy()
    return events


def facility_objective(ms: MetricSpace, roles: PointRole, sol: FacilitySolution,
                       clients) -> float:
    """Opening cost of the associated facilities plus integral service cost."""
    clients = np.asarray(clients, dtype=int)
    opening = float(sum(roles.opening_cost[a.fac_pos] for a in sol.active))
    if clients.size == 0 or not sol.active:
        return opening
    open_pts = np.array([roles.facilities[pos] for pos in sol.open_positions()])
    return opening + float(ms.dist[np.ix_(clients, open_pts)].min(axis=1).sum())
