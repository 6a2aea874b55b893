"""Online rounding for the center problem.

Maintains well-separated balls around chosen centers over a fractional mass
vector.  Each step first accounts the fractional move against the potential,
then drops balls whose in-ball mass fell below 1 - eps, then covers
uncovered clients with new balls, dropping at most one conflicting ball per
add.  Every event's effect on the drop counters and the potential is
asserted against its proven bound; violations raise with a state dump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metric import MetricSpace, PointRole

KEEP_TOL = 1e-9        # bias toward keeping the current solution
EVENT_TOL = 1e-9

ALPHA_KC = 3.0 + 2.0 * math.sqrt(2.0)
DELTA_KC = math.sqrt(2.0)
# eta solves 2**(1/eta) = alpha - delta - 1 = 2 + sqrt(2)
ETA_KC = 1.0 / math.log2(ALPHA_KC - DELTA_KC - 1.0)


class StateCorruptionError(AssertionError):
    """A proven property failed at runtime; carries the full rounding state."""

    def __init__(self, message: str, state):
        super().__init__(f"{message}\nstate dump: {state!r}")
        self.state = state


@dataclass(frozen=True)
class Event:
    t: int
    kind: str        # ADD | DROP | ACTIVATE
    subject: int     # center (k-center) or client (facility) point index
    reason: str = "" # LOW_MASS | SEPARATION for drops
    facility: int | None = None


@dataclass
class KCenterParams:
    eps: float
    alpha: float = ALPHA_KC
    delta: float = DELTA_KC
    eta: float = ETA_KC

    def __post_init__(self):
        if not (0.0 < self.eps <= 0.5):
            raise ValueError("eps must be in (0, 1/2]")
        if not self.alpha - self.delta - 1.0 > 2.0:
            raise ValueError("need alpha - delta - 1 > 2")


@dataclass
class Ball:
    center: int     # point index
    radius: float   # the radius parameter at birth
    born: int


@dataclass
class BallSolution:
    params: KCenterParams
    balls: list[Ball] = field(default_factory=list)
    n1: int = 0                 # low-mass drops
    n2: int = 0                 # separation drops
    corner_events: int = 0      # zero-radius adds whose drop bound is vacuous
    x_prev: np.ndarray | None = None

    @property
    def centers(self) -> list[int]:
        return [b.center for b in self.balls]


def ball_members(ms: MetricSpace, roles: PointRole, ball: Ball) -> np.ndarray:
    """Facility positions inside the ball (closed, tolerance 1e-9)."""
    return np.flatnonzero(ms.dist[ball.center, roles.facilities] <= ball.radius + KEEP_TOL)


def ball_mass(ms: MetricSpace, roles: PointRole, ball: Ball, x: np.ndarray) -> float:
    return float(x[ball_members(ms, roles, ball)].sum())


def potential_kcenter(ms: MetricSpace, roles: PointRole, sol: BallSolution,
                      x: np.ndarray) -> float:
    """Mass deficits scaled by (1 + eta log2 Delta)/eps, minus eta times the
    summed log2(Delta / r) with radii clamped into [1, Delta]."""
    p = sol.params
    delta_m = ms.delta
    val = 0.0
    scale = (1.0 + p.eta * math.log2(delta_m)) / p.eps if delta_m >= 1.0 else 1.0 / p.eps
    for b in sol.balls:
        deficit = max(0.0, 1.0 - ball_mass(ms, roles, b, x))
        r = min(max(b.radius, 1.0), delta_m)
        val += scale * deficit - p.eta * math.log2(delta_m / r)
    return val


def check_onedrop(ms: MetricSpace, sol: BallSolution, j: int, r_new: float) -> list[int]:
    """Indices into sol.balls that would violate separation against a new
    ball at j; proven to contain at most one entry, with a radius bound."""
    p = sol.params
    conflicts = []
    for idx, b in enumerate(sol.balls):
        need = b.radius + r_new + p.delta * min(b.radius, r_new)
        if ms.dist[j, b.center] < need - KEEP_TOL:
            conflicts.append(idx)
    if len(conflicts) > 1:
        raise StateCorruptionError(
            f"more than one ball conflicts with new center {j}", sol)
    if conflicts:
        r_i = sol.balls[conflicts[0]].radius
        if r_i <= (p.alpha - p.delta - 1.0) * r_new - KEEP_TOL:
            raise StateCorruptionError(
                f"conflicting ball radius {r_i} not above "
                f"{(p.alpha - p.delta - 1.0) * r_new}", sol)
    return conflicts


def _loop_guard(params: KCenterParams, k: int, delta_m: float, n_clients: int) -> int:
    log_term = math.ceil(math.log2(max(delta_m, 2.0)) / min(1.0, params.eta))
    return math.ceil((1.0 + params.eps) * k) + 4 * k * log_term + n_clients


def uncovered_clients(ms: MetricSpace, sol: BallSolution, clients: np.ndarray,
                      D_t: float) -> list[int]:
    p = sol.params
    out = []
    centers = sol.centers
    for j in clients:
        if not centers or min(ms.dist[j, c] for c in centers) > p.alpha * D_t + KEEP_TOL:
            out.append(int(j))
    return out


def check_invariants_kcenter(ms: MetricSpace, roles: PointRole, sol: BallSolution,
                             x: np.ndarray, clients: np.ndarray, D_t: float,
                             k: int) -> None:
    p = sol.params
    bad = uncovered_clients(ms, sol, clients, D_t)
    if bad:
        raise StateCorruptionError(f"coverage fails for clients {bad}", sol)
    for a in range(len(sol.balls)):
        for b in range(a + 1, len(sol.balls)):
            ba, bb = sol.balls[a], sol.balls[b]
            need = ba.radius + bb.radius + p.delta * min(ba.radius, bb.radius)
            if ms.dist[ba.center, bb.center] < need - KEEP_TOL:
                raise StateCorruptionError(
                    f"separation fails for centers {ba.center}, {bb.center}", sol)
    for b in sol.balls:
        if ball_mass(ms, roles, b, x) < 1.0 - p.eps - KEEP_TOL:
            raise StateCorruptionError(f"mass invariant fails at center {b.center}", sol)
    cap = (1.0 + 2.0 * p.eps) * (1.0 + p.eps) * k
    if len(sol.balls) > cap + KEEP_TOL:
        raise StateCorruptionError(
            f"center count {len(sol.balls)} exceeds {cap}", sol)


def step_kcenter(ms: MetricSpace, roles: PointRole, sol: BallSolution,
                 x_t: np.ndarray, D_t: float, clients, t: int, k: int) -> list[Event]:
    """Advance the rounding by one step and return its recourse events.

    Order: account the fractional move, drop low-mass balls, then cover
    uncovered clients (lowest index first), dropping conflicting balls.
    """
    p = sol.params
    clients = np.asarray(sorted(clients), dtype=int)
    events: list[Event] = []
    x_t = np.asarray(x_t, dtype=float)
    if sol.x_prev is None:
        sol.x_prev = np.zeros_like(x_t)
    delta_m = ms.delta
    move_scale = (1.0 + p.eta * math.log2(max(delta_m, 1.0))) / p.eps

    # fractional-move event: potential change against the moved in-ball mass
    phi_before_move = potential_kcenter(ms, roles, sol, sol.x_prev)
    phi = potential_kcenter(ms, roles, sol, x_t)
    in_ball = np.zeros(roles.facilities.size, dtype=bool)
    for b in sol.balls:
        in_ball[ball_members(ms, roles, b)] = True
    moved = float(np.abs(x_t - sol.x_prev)[in_ball].sum())
    if phi - phi_before_move > move_scale * moved + EVENT_TOL:
        raise StateCorruptionError(
            f"fractional-move potential jump {phi - phi_before_move} exceeds "
            f"{move_scale * moved}", sol)

    # phase 1: low-mass drops, ascending center index
    for b in sorted(sol.balls, key=lambda b: b.center):
        if ball_mass(ms, roles, b, x_t) < 1.0 - p.eps - KEEP_TOL:
            sol.balls.remove(b)
            sol.n1 += 1
            events.append(Event(t, "DROP", b.center, "LOW_MASS"))
            phi_new = potential_kcenter(ms, roles, sol, x_t)
            if 1.0 + (phi_new - phi) > EVENT_TOL:
                raise StateCorruptionError(
                    f"low-mass drop accounting fails at center {b.center}: "
                    f"1 + dPhi = {1.0 + phi_new - phi}", sol)
            phi = phi_new

    # phase 2: cover uncovered clients, lowest index first
    guard = _loop_guard(p, k, delta_m, clients.size)
    iters = 0
    while True:
        todo = uncovered_clients(ms, sol, clients, D_t)
        if not todo:
            break
        iters += 1
        if iters > guard:
            raise StateCorruptionError(
                f"cover loop exceeded its {guard}-iteration guard", sol)
        j = todo[0]
        conflicts = check_onedrop(ms, sol, j, D_t)
        new = Ball(center=j, radius=D_t, born=t)
        birth = ball_mass(ms, roles, new, x_t)
        if birth < 1.0 - KEEP_TOL:
            raise StateCorruptionError(
                f"birth mass {birth} below 1 at new center {j}", sol)
        dropped = [sol.balls[i] for i in conflicts]
        for b in dropped:
            sol.balls.remove(b)
            sol.n2 += 1
            events.append(Event(t, "DROP", b.center, "SEPARATION"))
        sol.balls.append(new)
        events.append(Event(t, "ADD", j))
        phi_new = potential_kcenter(ms, roles, sol, x_t)
        if dropped:
            if D_t >= 1.0:
                # one drop paid for by the radius gap: dN2 + dPhi <= 0
                if 1.0 + (phi_new - phi) > EVENT_TOL:
                    raise StateCorruptionError(
                        f"add-with-drop accounting fails at {j}: "
                        f"1 + dPhi = {1.0 + phi_new - phi}", sol)
            else:
                # zero-radius add: the clamped log term cannot pay for the
                # drop, but the separation lemma still holds (checked in
                # check_onedrop); count the corner instead of asserting
                sol.corner_events += 1
        else:
            if phi_new - phi > EVENT_TOL:
                raise StateCorruptionError(
                    f"add-no-drop raised the potential at {j}: dPhi = "
                    f"{phi_new - phi}", sol)
        phi = phi_new

    check_invariants_kcenter(ms, roles, sol, x_t, clients, D_t, k)
    sol.x_prev = x_t.copy()
    return events


def drop_budget_kcenter(params: KCenterParams, k: int, delta_m: float,
                        total_movement: float) -> float:
    """Run-level ceiling on N1 + N2 traced from the accounting constants."""
    log_d = math.log2(max(delta_m, 2.0))
    scale = (1.0 + params.eta * log_d) / params.eps
    return (scale * total_movement / min(1.0, params.eta)
            + 2.0 * k * log_d + (1.0 + params.eps) * k)


def kcenter_objective(ms: MetricSpace, sol: BallSolution, clients) -> float:
    """Largest client-to-nearest-center distance, 0 for no clients."""
    clients = np.asarray(clients, dtype=int)
    if clients.size == 0 or not sol.balls:
        return 0.0
    centers = np.array(sol.centers)
    return float(ms.dist[np.ix_(clients, centers)].min(axis=1).max())
