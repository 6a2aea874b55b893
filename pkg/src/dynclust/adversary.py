"""Adaptive recourse duels on hierarchical tree metrics.

Each phase walks the hierarchy from the top down to a leaf.  At every step
the requests land in the child subtree where the maintained fractional
solution keeps the least mass, then the maintainer responds; staying within
the target approximation therefore forces it to drag mass down the entire
path, while an offline comparator serves the whole phase from one location
it picks at the end.  The comparator's structural cost and the thin-mass
separation bound are recomputed and asserted every round.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .kcenter import StateCorruptionError
from .metric import HST, PointRole, build_hst
from .models import FacilityDriver, KCenterDriver, KMedianDriver

PROBLEMS = ("kcenter", "facility", "kmedian")
MASS_TOL = 1e-12
COST_TOL = 1e-6


@dataclass
class AdversaryState:
    """Walk position and bookkeeping for one duel.

    b > 1 plays the budget-augmented variant: the walk starts at the
    lightest of the 4b disjoint subtrees of matching depth, shrinking the
    effective height by log2(4b).
    """

    hst: HST
    problem: str
    c: float
    b: int = 1
    node: int = 0
    t: int = 0
    phase: int = 0
    eff_height: int = 0
    current: list = field(default_factory=list)   # [(point, count)] live now
    path: list = field(default_factory=list)      # requests of this phase
    canary_triggers: int = 0

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.b < 1 or (self.b & (self.b - 1)) != 0:
            raise ValueError("budget multiplier must be a power of two")
        if self.b > 1 and self.problem != "kcenter":
            raise ValueError("augmented budgets are wired for kcenter only")
        depth = 0 if self.b == 1 else int(math.log2(4 * self.b))
        if depth >= self.hst.height:
            raise ValueError("budget multiplier leaves no height to walk")
        self.eff_height = self.hst.height - depth


def _leaf_slice(hst: HST, v: int) -> slice:
    off = 2 ** hst.height - 1
    return slice(hst.leftmost_leaf(v) - off, hst.rightmost_leaf(v) - off + 1)


def subtree_mass(hst: HST, x: np.ndarray, v: int) -> float:
    """Total fractional mass on the leaves under node v (x is per leaf)."""
    return float(x[_leaf_slice(hst, v)].sum())


def _geo_sum(c: float, terms: int) -> float:
    """sum of (4c)^k for k = 0 .. terms-1 (zero when terms <= 0)."""
    return sum((4.0 * c) ** k for k in range(max(terms, 0)))


def _unit_cover_radius(dists: np.ndarray, x: np.ndarray) -> float:
    """Smallest radius whose ball collects one unit of mass."""
    order = np.argsort(dists, kind="stable")
    acc = 0.0
    for i in order:
        acc += float(x[i])
        if acc >= 1.0 - 1e-9:
            return float(dists[i])
    return math.inf


def _unit_fill_cost(dists: np.ndarray, x: np.ndarray) -> float:
    """Cheapest way to buy one unit of service mass at these distances."""
    order = np.argsort(dists, kind="stable")
    need, cost = 1.0, 0.0
    for i in order:
        take = min(float(x[i]), need)
        cost += take * float(dists[i])
        need -= take
        if need <= 1e-15:
            return cost
    return math.inf


def _opening_price(state: AdversaryState) -> float:
    return (4.0 * state.c) ** (state.hst.height - 1)


def _maintainer_cost(state: AdversaryState, x: np.ndarray, requests) -> float:
    """Objective value of the fractional leaf mass on the live requests."""
    hst = state.hst
    dist = hst.space.dist
    leaves = hst.leaves
    if state.problem == "kcenter":
        return max(_unit_cover_radius(dist[p, leaves], x) for p, _ in requests)
    service = sum(cnt * _unit_fill_cost(dist[p, leaves], x)
                  for p, cnt in requests)
    if state.problem == "facility":
        return service + _opening_price(state) * float(x.sum())
    return service


def _comparator_formula(state: AdversaryState, t: int) -> float:
    """Structural cost of the single-location comparator at walk step t."""
    c, h = state.c, state.eff_height
    if state.problem == "facility":
        return _opening_price(state) + (4.0 * c) ** t * _geo_sum(c, h - t)
    return 2.0 * _geo_sum(c, h - t)


def _assert_canary(state: AdversaryState, x: np.ndarray) -> None:
    # thin subtree mass must make the maintained solution pay past c times
    # the comparator; anything else means the metric or masses are corrupt
    t = state.t - 1
    cost = _maintainer_cost(state, x, state.current)
    bound = state.c * _comparator_formula(state, t)
    if cost <= bound * (1.0 + 1e-9):
        raise StateCorruptionError(
            f"thin-mass state undercuts the separation bound at step {t}: "
            f"cost {cost} vs required > {bound}", state)


def _requests_at(state: AdversaryState) -> list:
    hst = state.hst
    if state.problem == "facility":
        raw = (4.0 * state.c) ** state.t
        count = int(round(raw))
        if abs(raw - count) > 1e-9:
            raise ValueError("request counts need 4c to be an integer")
        return [(int(state.node), count)]
    lo = hst.leftmost_leaf(state.node)
    hi = hst.rightmost_leaf(state.node)
    return [(lo, 1)] if lo == hi else [(lo, 1), (hi, 1)]


def _start_node(state: AdversaryState, x: np.ndarray) -> int:
    if state.b == 1:
        return 0
    hst = state.hst
    depth = hst.height - state.eff_height
    nodes = [v for v in range(hst.num_nodes) if hst.depth[v] == depth]
    masses = [subtree_mass(hst, x, v) for v in nodes]
    return nodes[int(np.argmin(masses))]  # lowest index wins ties


def _advance(state: AdversaryState, x: np.ndarray):
    """One adversary move: returns (adds, removals) as (point, count) lists."""
    hst = state.hst
    if state.t > state.eff_height:
        # walk exhausted: clear every live request, restart from the top
        removals = state.current
        state.current = []
        state.path = []
        state.t = 0
        state.phase += 1
        return [], removals
    if state.t == 0:
        state.node = _start_node(state, x)
    else:
        left, right = hst.children(state.node)
        x_l = subtree_mass(hst, x, left)
        x_r = subtree_mass(hst, x, right)
        if x_l + x_r <= 0.5 + MASS_TOL:
            state.canary_triggers += 1
            _assert_canary(state, x)
        nxt = right if x_l >= x_r else left
        if hst.depth[nxt] != hst.depth[state.node] + 1:
            raise StateCorruptionError("walk skipped a level", state)
        state.node = nxt
    adds = _requests_at(state)
    removals = state.current
    state.current = adds
    state.path.append(adds)
    state.t += 1
    return adds, removals


def next_requests_kcenter(state: AdversaryState, x):
    """Two extreme-leaf clients of the current subtree (one at the leaf),
    dropping the previous step's clients; descends into the lighter child."""
    if state.problem != "kcenter":
        raise ValueError("state was built for " + state.problem)
    return _advance(state, np.asarray(x, dtype=float))


def next_requests_facility(state: AdversaryState, x):
    """(4c)^t co-located clients at the lighter child of the previous
    request node; facilities live only on leaves."""
    if state.problem != "facility":
        raise ValueError("state was built for " + state.problem)
    return _advance(state, np.asarray(x, dtype=float))


def next_requests_kmedian(state: AdversaryState, x):
    """Identical walk and client pattern to the center variant."""
    if state.problem != "kmedian":
        raise ValueError("state was built for " + state.problem)
    return _advance(state, np.asarray(x, dtype=float))


_NEXT = {"kcenter": next_requests_kcenter,
         "facility": next_requests_facility,
         "kmedian": next_requests_kmedian}


def _assert_comparator(state: AdversaryState, recorded: list) -> None:
    """Re-derive the single-location comparator's cost at every step of the
    finished phase and check it against the closed forms."""
    hst, c = state.hst, state.c
    dist = hst.space.dist
    h_eff = state.eff_height
    v = recorded[-1][0][0]
    if not hst.is_leaf(v):
        raise StateCorruptionError("phase did not end on a leaf", state)
    for t, reqs in enumerate(recorded):
        tol = COST_TOL * (1.0 + _comparator_formula(state, t))
        if state.problem == "kcenter":
            cost = max(dist[p, v] for p, _ in reqs)
            ref = _comparator_formula(state, t)
            if abs(cost - ref) > tol:
                raise StateCorruptionError(
                    f"comparator cost {cost} != {ref} at step {t}", state)
            # geometric-sum sanity: the top term dominates once 4c >= 2
            if 4.0 * c >= 2.0 and t < h_eff and \
                    ref > 4.0 * (4.0 * c) ** (h_eff - 1 - t) + tol:
                raise StateCorruptionError("comparator growth off-scale", state)
        elif state.problem == "facility":
            cost = _opening_price(state) + sum(cnt * dist[p, v]
                                               for p, cnt in reqs)
            ref = _comparator_formula(state, t)
            if abs(cost - ref) > tol:
                raise StateCorruptionError(
                    f"comparator cost {cost} != {ref} at step {t}", state)
            if cost > 3.0 * _opening_price(state) + tol:
                raise StateCorruptionError("comparator exceeds its cap", state)
        else:
            cost = sum(cnt * dist[p, v] for p, cnt in reqs)
            if cost > 2.0 * _comparator_formula(state, t) + tol:
                raise StateCorruptionError(
                    f"comparator cost {cost} above twice the center form "
                    f"at step {t}", state)


def _apply(live: dict, adds, removals) -> None:
    for p, n in removals:
        rest = live.get(p, 0) - n
        if rest < 0:
            raise ValueError(f"removing more requests than live at point {p}")
        if rest == 0:
            live.pop(p, None)
        else:
            live[p] = rest
    for p, n in adds:
        live[p] = live.get(p, 0) + n


def _expand(live: dict) -> np.ndarray:
    if not live:
        return np.zeros(0, dtype=int)
    pts = np.array(sorted(live))
    return np.repeat(pts, [live[p] for p in pts])


def run_adversary(problem: str, h: int, c: float, phases: int,
                  beta: float = 1.5, eps: float = 0.125, k: int = 1,
                  b: int = 1, csv_path: str | None = None) -> list[dict]:
    """Duel the fractional maintainer against the adaptive walk.

    Returns one report row per phase: measured fractional l1 movement, the
    comparator's recourse (one location per phase), and their ratio.
    """
    hst = build_hst(h, c)
    ms = hst.space
    n_leaves = hst.leaves.size
    if problem == "facility":
        price = np.full(n_leaves, (4.0 * c) ** (h - 1))
        roles = PointRole(hst.leaves, price)
        driver = FacilityDriver(ms, roles, beta=beta, eps=eps)
    elif problem == "kmedian":
        roles = PointRole(hst.leaves, np.zeros(n_leaves))
        driver = KMedianDriver(ms, roles, k=k, beta=beta, eps=eps)
    elif problem == "kcenter":
        roles = PointRole(hst.leaves, np.zeros(n_leaves))
        driver = KCenterDriver(ms, roles, k=k, beta=beta, eps=eps,
                               mass_budget=None if b == 1 else float(b * k))
    else:
        raise ValueError(f"unknown problem {problem!r}")
    next_fn = _NEXT[problem]
    state = AdversaryState(hst=hst, problem=problem, c=c, b=b)
    live: dict[int, int] = {}
    rows = []
    for _ in range(phases):
        phase_idx = state.phase
        movement = 0.0
        recorded = []
        for _ in range(state.eff_height + 1):
            adds, removals = next_fn(state, driver.x)
            _apply(live, adds, removals)
            r = driver.step(_expand(live))
            movement += r.movement
            recorded.append(list(adds))
        adds, removals = next_fn(state, driver.x)  # teardown, restarts state
        _apply(live, adds, removals)
        if live:
            raise StateCorruptionError("teardown left live requests", state)
        r = driver.step([])
        movement += r.movement
        _assert_comparator(state, recorded)
        rows.append({"phase": phase_idx,
                     "measured_movement": movement,
                     "comparator_recourse": 1,
                     "ratio": movement / 1.0,
                     "h": h, "c": c})
    if csv_path is not None:
        write_report(rows, csv_path)
    return rows


def write_report(rows: list[dict], path: str) -> None:
    fields = ["phase", "measured_movement", "comparator_recourse",
              "ratio", "h", "c"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
