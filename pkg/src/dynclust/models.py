"""Per-step fractional optima, bodies, and state advancement.

Three problems share the pattern: compute the per-step fractional optimum,
build the feasible body scaled by beta times that optimum, project the
previous fractional point into the relaxed body, and (for the facility
objectives) recover service rows greedily.

Facility-style projections run in open-variable space.  Service variables
carry movement weight zero, so eliminating them does not change any optimal
movement; their feasible region projects onto open variables as one shared
mass row plus a convex service-cost cap that we enforce by lazy threshold
cuts.  The explicit service-variable bodies are still constructed for small
instances and used by tests to confirm the reduction solves the same
problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .body import Body, InfeasibleBodyError, movement_of, project
from .metric import DIST_TOL, MetricSpace, PointRole
from .simplex import solve_lp

OPT_TOL = 1e-7
CUT_TOL = 1e-9
MAX_CUT_ROUNDS = 500


@dataclass
class DynamicInstance:
    """A metric, role assignment, parameters, and an ordered event stream."""

    metric: MetricSpace
    roles: PointRole
    k: int
    beta: float
    eps: float
    events: list[tuple[str, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.beta < 1.0:
            raise ValueError("beta must be >= 1")
        if not (0.0 < self.eps <= 1.0):
            raise ValueError("eps must be in (0, 1]")
        active: set[int] = set()
        for kind, j in self.events:
            if kind == "insert":
                active.add(j)
            elif kind == "delete":
                if j not in active:
                    raise ValueError(f"delete of inactive client {j}")
                active.remove(j)
            else:
                raise ValueError(f"unknown event kind {kind!r}")


@dataclass
class OptTrace:
    """Per-step fractional optima; ball radii D_t for the center problem."""

    opt: list[float] = field(default_factory=list)
    D: list[float] = field(default_factory=list)


# k-center


def _cover_value(ms: MetricSpace, fac: np.ndarray, clients: np.ndarray, radius: float):
    """Min total open mass covering every client within radius, or None if
    some client has an empty ball."""
    rows = []
    for j in clients:
        sup = ms.dist[j, fac] <= radius + DIST_TOL
        if not sup.any():
            return None
        rows.append(sup.astype(float))
    A = np.unique(np.array(rows), axis=0)
    res = solve_lp(np.ones(fac.size), A_ub=-A, b_ub=-np.ones(A.shape[0]))
    assert res.status == "optimal"
    return res.objective


def opt_kcenter(ms: MetricSpace, roles: PointRole, clients, k: int) -> float:
    """Smallest radius whose min-cover LP uses at most k units of open mass.

    Candidates are 0 plus the distinct client-to-facility distances; the
    cover value is nonincreasing in the radius, so binary search applies.
    """
    clients = np.asarray(clients, dtype=int)
    if clients.size == 0:
        return 0.0
    fac = roles.facilities
    cand = np.unique(np.concatenate([[0.0], ms.dist[np.ix_(clients, fac)].ravel()]))

    def feasible(r: float) -> bool:
        v = _cover_value(ms, fac, clients, r)
        return v is not None and v <= k + OPT_TOL

    lo, hi = 0, cand.size - 1
    if feasible(cand[lo]):
        return float(cand[lo])
    assert feasible(cand[hi]), "full-radius cover must fit in any k >= 1"
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(cand[mid]):
            hi = mid
        else:
            lo = mid
    return float(cand[hi])


def build_body_kcenter(ms: MetricSpace, roles: PointRole, clients, k: int,
                       beta: float, opt_t: float,
                       mass_budget: float | None = None) -> Body:
    """Covering row per client over its radius-D ball, D = min(beta*opt, delta);
    one mass-budget packing row (budget k unless overridden); unit weights."""
    clients = np.asarray(clients, dtype=int)
    fac = roles.facilities
    D = min(beta * opt_t, ms.delta)
    rows = []
    for j in clients:
        rows.append((ms.dist[j, fac] <= D + DIST_TOL).astype(float))
    cov = np.unique(np.array(rows), axis=0) if rows else np.zeros((0, fac.size))
    pack = np.ones((1, fac.size)) / (k if mass_budget is None else mass_budget)
    return Body(num_vars=fac.size, weights=np.ones(fac.size), cov_A=cov, pack_A=pack)


# facility location and k-median share the service-cost machinery


def greedy_service(ms: MetricSpace, roles: PointRole, clients, x: np.ndarray) -> np.ndarray:
    """Nearest-first service rows: per client the cost-minimal y with
    y_ij <= x_i and total 1 (or all of x when sum(x) < 1)."""
    clients = np.asarray(clients, dtype=int)
    fac = roles.facilities
    Y = np.zeros((clients.size, fac.size))
    for r, j in enumerate(clients):
        order = np.lexsort((np.arange(fac.size), ms.dist[j, fac]))
        need = 1.0
        for i in order:
            if need <= 0.0:
                break
            take = min(x[i], need)
            if take > 0.0:
                Y[r, i] = take
                need -= take
    return Y


def service_cost(ms: MetricSpace, roles: PointRole, clients, Y: np.ndarray,
                 weights=None) -> float:
    clients = np.asarray(clients, dtype=int)
    if clients.size == 0:
        return 0.0
    per_client = (ms.dist[np.ix_(clients, roles.facilities)] * Y).sum(axis=1)
    if weights is None:
        return float(per_client.sum())
    return float(np.asarray(weights, dtype=float) @ per_client)


def _service_cut(dists: np.ndarray, x: np.ndarray):
    """Tight linear lower bound on one client's nearest-first fill cost.

    The fill cost equals max over thresholds theta of
    theta - sum_i max(0, theta - d_i) x_i; the maximizing theta is the
    distance at which the greedy fill completes.  Returns (value, theta).
    """
    order = np.argsort(dists, kind="stable")
    need, cost, theta = 1.0, 0.0, float(dists[order[-1]])
    for i in order:
        if need <= 1e-15:
            break
        take = min(x[i], need)
        cost += take * dists[i]
        need -= take
        theta = float(dists[i])
    if need > 1e-15:
        # not enough mass: the bound below still holds with the largest theta
        cost += need * theta
    return cost, theta


def _facility_master(ms: MetricSpace, roles: PointRole, clients, k, mode: str,
                     prev=None, eps: float = 0.0, cap: float = np.inf,
                     weights=None):
    """Shared cutting-plane loop over open-variable space.

    mode "opt": minimize opening + service cost subject to mass >= 1
    (plus mass <= k for the k-median variant).
    mode "project": minimize weighted l1 distance from prev subject to
    mass >= 1, service+opening cost <= cap, and for the k-median variant
    mass <= (1+eps)k.
    weights are client multiplicities (co-located duplicates collapse).
    """
    clients = np.asarray(clients, dtype=int)
    fac = roles.facilities
    nf = fac.size
    f = roles.opening_cost
    assert clients.size, "empty client sets are handled by the callers"
    w_cl = np.ones(clients.size) if weights is None else \
        np.asarray(weights, dtype=float)
    D = ms.dist[np.ix_(clients, fac)]
    # initial cut: theta_j = max distance (always valid, makes mass pay)
    thetas = [D.max(axis=1).astype(float)]
    seen = {tuple(np.round(thetas[0], 12))}

    for _ in range(MAX_CUT_ROUNDS):
        if mode == "opt":
            # vars: x (nf), s (1); s underestimates the total service cost
            c = np.concatenate([f, [1.0]])
            rows, rhs = [], []
            rows.append(np.concatenate([-np.ones(nf), [0.0]]))
            rhs.append(-1.0)
            rows.append(np.concatenate([np.zeros(nf), [-1.0]]))  # s >= 0
            rhs.append(0.0)
            if k is not None:
                rows.append(np.concatenate([np.ones(nf), [0.0]]))
                rhs.append(float(k))
            for th in thetas:
                coeff = (w_cl[:, None] * np.maximum(0.0, th[:, None] - D)).sum(axis=0)
                rows.append(np.concatenate([-coeff, [-1.0]]))
                rhs.append(-float(w_cl @ th))
            res = solve_lp(c, A_ub=np.array(rows), b_ub=np.array(rhs))
            assert res.status == "optimal", res.status
            x = res.x[:nf]
        else:
            # vars: p (nf), q (nf); x = prev + p - q
            w = np.ones(nf)
            c = np.concatenate([w, w])
            rows, rhs, labels = [], [], []
            rows.append(np.concatenate([-np.ones(nf), np.ones(nf)]))
            rhs.append(float(prev.sum()) - 1.0)
            labels.append("mass")
            if k is not None:
                rows.append(np.concatenate([np.ones(nf), -np.ones(nf)]))
                rhs.append((1.0 + eps) * k - float(prev.sum()))
                labels.append("budget")
            for th in thetas:
                # total cost cut: (f - g) x <= cap - sum(w theta), g from the
                # threshold form of the per-client fill cost
                a = f - (w_cl[:, None] * np.maximum(0.0, th[:, None] - D)).sum(axis=0)
                rows.append(np.concatenate([a, -a]))
                rhs.append(cap - float(w_cl @ th) - float(a @ prev))
                labels.append("cost")
            for i in range(nf):
                row = np.zeros(2 * nf)
                row[nf + i], row[i] = 1.0, -1.0
                rows.append(row)
                rhs.append(float(prev[i]))
                labels.append(f"nonneg[{i}]")
            res = solve_lp(c, A_ub=np.array(rows), b_ub=np.array(rhs))
            if res.status == "infeasible":
                raise InfeasibleBodyError([labels[i] for i in res.infeasible_rows])
            assert res.status == "optimal", res.status
            x = prev + res.x[:nf] - res.x[nf:]
            np.maximum(x, 0.0, out=x)

        # exact service cost at x, and the tight thresholds
        vals = np.empty(clients.size)
        tight = np.empty(clients.size)
        for r in range(clients.size):
            vals[r], tight[r] = _service_cut(D[r], x)
        total = float(w_cl @ vals) + float(f @ x)
        if mode == "opt":
            bound = float(f @ x + res.x[nf])
            done = total <= bound + CUT_TOL * (1.0 + abs(bound))
            slack_done = total <= bound + OPT_TOL * (1.0 + abs(bound))
        else:
            # tight enough that the normalized cost row meets its 1e-9 check
            done = total <= cap * (1.0 + 1e-10)
            slack_done = total <= cap * (1.0 + OPT_TOL)
        key = tuple(np.round(tight, 12))
        # a repeated cut with the cap only just missed is float noise
        if done or (key in seen and slack_done):
            return x, res
        if key in seen:
            raise RuntimeError("cutting-plane loop stalled short of feasibility")
        seen.add(key)
        thetas.append(tight)
    raise RuntimeError("cutting-plane loop did not converge")


def opt_facility(ms: MetricSpace, roles: PointRole, clients,
                 weights=None) -> float:
    """Exact fractional optimum of opening plus service cost."""
    clients = np.asarray(clients, dtype=int)
    if clients.size == 0:
        return 0.0
    x, res = _facility_master(ms, roles, clients, k=None, mode="opt",
                              weights=weights)
    Y = greedy_service(ms, roles, clients, x)
    return float(roles.opening_cost @ x) + \
        service_cost(ms, roles, clients, Y, weights=weights)


def opt_kmedian(ms: MetricSpace, roles: PointRole, clients, k: int,
                weights=None) -> float:
    """Exact fractional optimum of service cost under the mass budget k."""
    clients = np.asarray(clients, dtype=int)
    if clients.size == 0:
        return 0.0
    zero_roles = PointRole(roles.facilities, np.zeros(roles.facilities.size))
    x, res = _facility_master(ms, zero_roles, clients, k=k, mode="opt",
                              weights=weights)
    Y = greedy_service(ms, zero_roles, clients, x)
    val = service_cost(ms, zero_roles, clients, Y, weights=weights)
    # distances are 0 or >= 1 after normalization, so a positive optimum is
    # at least the smallest multiplicity; below that is LP placement noise
    w_min = 1.0 if weights is None else float(np.asarray(weights).min())
    return val if val >= 0.5 * w_min else 0.0


def _zero_opt_cover(ms: MetricSpace, roles: PointRole, clients, f) -> Body:
    """Body for the opt = 0 corner: positive-cost opens pinned to zero and
    service restricted to distance-0 facilities, one covering row per client."""
    clients = np.asarray(clients, dtype=int)
    fac = roles.facilities
    allowed = f <= 0.0
    rows = []
    for j in clients:
        sup = (ms.dist[j, fac] <= DIST_TOL) & allowed
        if not sup.any():
            raise InfeasibleBodyError([f"covering[client {j}]"])
        rows.append(sup.astype(float))
    cov = np.unique(np.array(rows), axis=0) if rows else np.zeros((0, fac.size))
    return Body(num_vars=fac.size, weights=np.ones(fac.size), cov_A=cov,
                pack_A=np.zeros((0, fac.size)),
                fixed_zero=np.flatnonzero(~allowed))


def build_body_facility(ms: MetricSpace, roles: PointRole, clients,
                        beta: float, opt_t: float) -> Body:
    """Explicit service-variable body: layout [x (nf), y (row-major client x
    facility)].  Covering row per client over its y block, coupling y <= x,
    one normalized cost row; movement weight 1 on x, 0 on y."""
    clients = np.asarray(clients, dtype=int)
    fac = roles.facilities
    nf, nc = fac.size, clients.size
    f = roles.opening_cost
    n = nf + nf * nc
    w = np.concatenate([np.ones(nf), np.zeros(nf * nc)])
    if nc == 0:
        return Body(num_vars=nf, weights=np.ones(nf),
                    cov_A=np.zeros((0, nf)), pack_A=np.zeros((0, nf)))
    if opt_t <= 0.0:
        base = _zero_opt_cover(ms, roles, clients, f)
        return base
    cov = np.zeros((nc, n))
    coup = []
    for r in range(nc):
        blk = nf + r * nf
        cov[r, blk:blk + nf] = 1.0
        coup.extend((blk + i, i) for i in range(nf))
    cap = beta * opt_t
    pack = np.zeros((1, n))
    pack[0, :nf] = f / cap
    for r, j in enumerate(clients):
        pack[0, nf + r * nf: nf + (r + 1) * nf] = ms.dist[j, fac] / cap
    return Body(num_vars=n, weights=w, cov_A=cov, pack_A=pack,
                coupling=np.array(coup, dtype=int))


def build_body_kmedian(ms: MetricSpace, roles: PointRole, clients, k: int,
                       beta: float, opt_t: float) -> Body:
    """As the facility body with zero opening costs, plus the mass budget row."""
    clients = np.asarray(clients, dtype=int)
    fac = roles.facilities
    nf, nc = fac.size, clients.size
    zero = np.zeros(nf)
    if nc == 0:
        return Body(num_vars=nf, weights=np.ones(nf),
                    cov_A=np.zeros((0, nf)), pack_A=np.ones((1, nf)) / k)
    zero_roles = PointRole(fac, zero)
    if opt_t <= 0.0:
        base = _zero_opt_cover(ms, zero_roles, clients, zero)
        return Body(num_vars=nf, weights=base.weights, cov_A=base.cov_A,
                    pack_A=np.ones((1, nf)) / k, fixed_zero=base.fixed_zero)
    body = build_body_facility(ms, zero_roles, clients, beta, opt_t)
    budget = np.zeros((1, body.num_vars))
    budget[0, :nf] = 1.0 / k
    return Body(num_vars=body.num_vars, weights=body.weights, cov_A=body.cov_A,
                pack_A=np.vstack([budget, body.pack_A]), coupling=body.coupling)


def project_facility_reduced(ms: MetricSpace, roles: PointRole, clients,
                             beta: float, opt_t: float, prev_x: np.ndarray,
                             eps: float, k: int | None = None, weights=None):
    """Minimal open-variable movement into the relaxed facility body.

    Equivalent to projecting the explicit body (service variables cost no
    movement); returns (x, movement).  k given switches to the k-median
    variant: zero opening costs and the relaxed mass budget.
    """
    clients = np.asarray(clients, dtype=int)
    fac = roles.facilities
    prev_x = np.asarray(prev_x, dtype=float)
    f = np.zeros(fac.size) if k is not None else roles.opening_cost
    use_roles = PointRole(fac, f)
    if clients.size == 0:
        if k is None:
            return prev_x.copy(), 0.0
        body = build_body_kmedian(ms, roles, clients, k, beta, opt_t)
        return project(body, prev_x, eps)
    if opt_t <= 0.0:
        body = _zero_opt_cover(ms, use_roles, clients, f)
        if k is not None:
            body = Body(num_vars=body.num_vars, weights=body.weights,
                        cov_A=body.cov_A, pack_A=np.ones((1, fac.size)) / k,
                        fixed_zero=body.fixed_zero)
        return project(body, prev_x, eps)
    cap = (1.0 + eps) * beta * opt_t
    x, _ = _facility_master(ms, use_roles, clients, k=k, mode="project",
                            prev=prev_x, eps=eps, cap=cap, weights=weights)
    w = np.ones(fac.size)
    return x, float(np.abs(x - prev_x) @ w)


# drivers


@dataclass
class StepResult:
    t: int
    opt_t: float
    movement: float
    x: np.ndarray
    Y: np.ndarray | None = None


class KCenterDriver:
    """Maintains the fractional center mass across client-set changes.

    mass_budget loosens only the packing row (coverage still targets the
    k-center optimum), for augmented-budget duels."""

    def __init__(self, ms: MetricSpace, roles: PointRole, k: int,
                 beta: float, eps: float, mass_budget: float | None = None):
        self.ms, self.roles, self.k = ms, roles, k
        self.beta, self.eps = beta, eps
        self.mass_budget = mass_budget
        self.x = np.zeros(roles.facilities.size)
        self.t = -1
        self.trace = OptTrace()

    def step(self, clients) -> StepResult:
        self.t += 1
        clients = np.asarray(sorted(clients), dtype=int)
        opt_t = opt_kcenter(self.ms, self.roles, clients, self.k)
        body = build_body_kcenter(self.ms, self.roles, clients, self.k,
                                  self.beta, opt_t,
                                  mass_budget=self.mass_budget)
        self.x, movement = project(body, self.x, self.eps)
        self.trace.opt.append(opt_t)
        self.trace.D.append(min(self.beta * opt_t, self.ms.delta))
        return StepResult(self.t, opt_t, movement, self.x.copy())


class FacilityDriver:
    """Maintains fractional opens plus greedy service rows."""

    def __init__(self, ms: MetricSpace, roles: PointRole, beta: float, eps: float):
        self.ms, self.roles = ms, roles
        self.beta, self.eps = beta, eps
        self.x = np.zeros(roles.facilities.size)
        self.t = -1
        self.trace = OptTrace()

    def step(self, clients) -> StepResult:
        # co-located duplicates collapse to one weighted client; the
        # returned Y rows align with the deduplicated sorted client list
        self.t += 1
        uniq, counts = np.unique(np.asarray(clients, dtype=int),
                                 return_counts=True)
        opt_t = opt_facility(self.ms, self.roles, uniq, weights=counts)
        self.x, movement = project_facility_reduced(
            self.ms, self.roles, uniq, self.beta, opt_t, self.x, self.eps,
            weights=counts)
        Y = greedy_service(self.ms, self.roles, uniq, self.x)
        self.trace.opt.append(opt_t)
        return StepResult(self.t, opt_t, movement, self.x.copy(), Y)


class KMedianDriver:
    """Facility-style maintenance with zero opening costs and a mass budget."""

    def __init__(self, ms: MetricSpace, roles: PointRole, k: int,
                 beta: float, eps: float):
        self.ms, self.roles, self.k = ms, roles, k
        self.beta, self.eps = beta, eps
        self.x = np.zeros(roles.facilities.size)
        self.t = -1
        self.trace = OptTrace()

    def step(self, clients) -> StepResult:
        self.t += 1
        uniq, counts = np.unique(np.asarray(clients, dtype=int),
                                 return_counts=True)
        opt_t = opt_kmedian(self.ms, self.roles, uniq, self.k, weights=counts)
        self.x, movement = project_facility_reduced(
            self.ms, self.roles, uniq, self.beta, opt_t, self.x, self.eps,
            k=self.k, weights=counts)
        zero_roles = PointRole(self.roles.facilities,
                               np.zeros(self.roles.facilities.size))
        Y = greedy_service(self.ms, zero_roles, uniq, self.x)
        self.trace.opt.append(opt_t)
        return StepResult(self.t, opt_t, movement, self.x.copy(), Y)
