"""End-to-end experiment runs: stream generation, per-step pipeline, traces.

A run applies an insert/delete stream to one of the three maintainers,
rounds every fractional step, re-executes all solution invariants, and
emits trace.csv, events.log and summary.json into an output directory.
Identical config and seed give byte-identical artifacts.
"""

from __future__ import annotations

import bisect
import json
import os
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from .facility import (FacilityParams, FacilitySolution, check_invariants_facility,
                       check_objective_split, facility_objective,
                       fractional_service_cost, step_facility)
from .kcenter import (BallSolution, KCenterParams, StateCorruptionError,
                      check_invariants_kcenter, kcenter_objective, step_kcenter)
from .kmedian import kmedian_objective, step_kmedian
from .metric import MetricSpace, PointRole, from_feature_rows, load_points_csv
from .models import FacilityDriver, KCenterDriver, KMedianDriver

PROBLEMS = ("kcenter", "facility", "kmedian")
BOUND_TOL = 1e-6
MAX_COMPARATOR_T = 100

TRACE_COLUMNS = ["t", "event", "opt_t", "integral_objective", "bound",
                 "frac_movement_step", "frac_movement_cum",
                 "integral_recourse_step", "integral_recourse_cum",
                 "num_centers"]


@dataclass(frozen=True)
class RunConfig:
    """One experiment: problem, protocol parameters, dataset, seed.

    data is either a CSV path (feature rows) or a synthetic spec of the
    form gaussian:NxD.  facility_cost applies to facility location only:
    uniform:delta/2 opens every point at half the aspect ratio,
    uniform:VALUE at the given float.
    """

    problem: str
    data: str = "gaussian:200x2"
    k: int = 4
    beta: float = 1.5
    eps: float = 0.25
    T: int = 100
    p_insert: float = 0.9
    seed: int = 0
    facility_cost: str = "uniform:delta/2"
    offline_comparator: bool = False

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not 0.0 <= self.p_insert <= 1.0:
            raise ValueError("p_insert must lie in [0, 1]")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.beta < 1.0:
            raise ValueError("beta must be >= 1")
        if not 0.0 < self.eps <= 0.5:
            raise ValueError("eps must be in (0, 1/2]")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.offline_comparator and self.T > MAX_COMPARATOR_T:
            raise ValueError(
                f"offline comparator is capped at T <= {MAX_COMPARATOR_T}")


@dataclass(frozen=True)
class TraceRecord:
    """One trace row; the bound column is alpha*beta*opt_t for k-center and
    alpha*(1+eps)*beta*opt_t for facility location and k-median.

    integral_objective <= bound + 1e-6 is enforced at every step with at
    least one active client.  A step that deletes the last client leaves
    opt_t = 0 while retained facilities may still carry opening cost; the
    empty instance constrains nothing, so the ratio is vacuous there.
    """

    t: int
    event: str
    opt_t: float
    integral_objective: float
    bound: float
    frac_movement_step: float
    frac_movement_cum: float
    integral_recourse_step: int
    integral_recourse_cum: int
    num_centers: int
    comparator_movement_cum: float | None = None

    def row(self) -> list[str]:
        out = [str(self.t), self.event, repr(self.opt_t),
               repr(self.integral_objective), repr(self.bound),
               repr(self.frac_movement_step), repr(self.frac_movement_cum),
               str(self.integral_recourse_step),
               str(self.integral_recourse_cum), str(self.num_centers)]
        if self.comparator_movement_cum is not None:
            out.append(repr(self.comparator_movement_cum))
        return out


def load_dataset(data: str, seed: int) -> np.ndarray:
    """Feature rows from a CSV path or a gaussian:NxD synthetic spec.

    Synthetic points are standard normal, drawn from a generator derived
    from the run seed but independent of the stream draws.
    """
    if data.startswith("gaussian:"):
        shape = data[len("gaussian:"):]
        n_s, sep, d_s = shape.partition("x")
        try:
            n, d = int(n_s), int(d_s)
        except ValueError:
            raise ValueError(f"bad synthetic spec {data!r}, want gaussian:NxD")
        if not sep or n < 1 or d < 1:
            raise ValueError(f"bad synthetic spec {data!r}, want gaussian:NxD")
        rng = np.random.default_rng([seed, 1])
        return rng.standard_normal((n, d))
    return load_points_csv(data)


def facility_costs(rule: str, n: int, delta: float) -> np.ndarray:
    kind, _, val = rule.partition(":")
    if kind != "uniform" or not val:
        raise ValueError(f"unsupported facility-cost rule {rule!r}")
    cost = delta / 2.0 if val == "delta/2" else float(val)
    if cost < 0.0:
        raise ValueError("facility cost must be >= 0")
    return np.full(n, cost)


def generate_stream(points, T: int, p_insert: float,
                    seed: int) -> list[tuple[str, int]]:
    """Deterministic insert/delete stream over the point pool.

    Insertions take the next unused point of a seed-shuffled order;
    deletions pick uniformly among active clients.  A step with nothing
    active skips the coin and inserts.  Deleted points are not reused, so
    a stream can exhaust the pool.
    """
    n = len(points)
    if T < 1:
        raise ValueError("T must be >= 1")
    if not 0.0 <= p_insert <= 1.0:
        raise ValueError("p_insert must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    next_ins = 0
    active: list[int] = []
    events: list[tuple[str, int]] = []
    for t in range(T):
        if not active or rng.random() < p_insert:
            if next_ins >= n:
                raise RuntimeError(
                    f"point pool exhausted at step {t}: all {n} points used")
            pid = int(order[next_ins])
            next_ins += 1
            bisect.insort(active, pid)
            events.append(("insert", pid))
        else:
            idx = int(rng.integers(len(active)))
            events.append(("delete", active.pop(idx)))
    return events


def _state_dump(sol, x, active, t: int) -> str:
    lines = [f"aborted at step t={t}", f"active clients: {list(active)}",
             f"solution: {sol!r}",
             f"fractional x (nonzeros): "
             f"{ {int(i): float(v) for i, v in enumerate(x) if v > 1e-12} }"]
    return "\n".join(lines)


def _write_artifacts(out_dir, records, log_lines, summary, columns) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "trace.csv"), "w", encoding="utf-8",
              newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for r in records:
            fh.write(",".join(r.row()) + "\n")
    with open(os.path.join(out_dir, "events.log"), "w", encoding="utf-8",
              newline="") as fh:
        for line in log_lines:
            fh.write(line + "\n")
    if summary is not None:
        with open(os.path.join(out_dir, "summary.json"), "w",
                  encoding="utf-8", newline="") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")


def run(config: RunConfig, out_dir=None):
    """Execute one configured stream; returns (records, summary).

    Per step: apply the event, advance the fractional maintainer, round,
    re-run every solution invariant, check the objective bound, append a
    TraceRecord.  Any violation aborts with the step index after writing
    the partial artifacts and a state dump.
    """
    points = load_dataset(config.data, config.seed)
    ms = from_feature_rows(points)
    n = ms.n
    fac = np.arange(n)
    if config.problem == "facility":
        roles = PointRole(fac, facility_costs(config.facility_cost, n, ms.delta))
    else:
        roles = PointRole(fac, np.zeros(n))

    if config.problem == "kcenter":
        driver = KCenterDriver(ms, roles, config.k, config.beta, config.eps)
        sol = BallSolution(KCenterParams(config.eps))
        bound_factor = sol.params.alpha * config.beta
    elif config.problem == "facility":
        driver = FacilityDriver(ms, roles, config.beta, config.eps)
        sol = FacilitySolution()
        bound_factor = sol.params.alpha * (1.0 + config.eps) * config.beta
    else:
        driver = KMedianDriver(ms, roles, config.k, config.beta, config.eps)
        sol = FacilitySolution()
        bound_factor = sol.params.alpha * (1.0 + config.eps) * config.beta

    events = generate_stream(points, config.T, config.p_insert, config.seed)
    active: list[int] = []
    records: list[TraceRecord] = []
    log_lines: list[str] = []
    snapshots: list[set[int]] = [set()]
    client_sets: list[np.ndarray] = []
    opts: list[float] = []
    cum_move = 0.0
    cum_rec = 0

    for t, (kind, pid) in enumerate(events):
        if kind == "insert":
            bisect.insort(active, pid)
        else:
            active.remove(pid)
        cl = np.asarray(active, dtype=int)
        try:
            res = driver.step(active)
            if config.problem == "kcenter":
                D_t = min(config.beta * res.opt_t, ms.delta)
                ev = step_kcenter(ms, roles, sol, res.x, D_t, active, t,
                                  config.k)
                check_invariants_kcenter(ms, roles, sol, res.x, cl, D_t,
                                         config.k)
                objective = kcenter_objective(ms, sol, active)
                centers = set(sol.centers)
            else:
                if config.problem == "facility":
                    ev = step_facility(ms, roles, sol, res.x, res.Y, active, t)
                else:
                    ev = step_kmedian(ms, roles, sol, res.x, res.Y, active, t,
                                      config.k, config.eps)
                R = np.array([fractional_service_cost(ms, roles, j, res.Y[i])
                              for i, j in enumerate(cl)])
                check_invariants_facility(ms, roles, sol, res.x, cl, R)
                check_objective_split(ms, roles, sol, res.x, cl, R)
                if config.problem == "facility":
                    objective = facility_objective(ms, roles, sol, active)
                else:
                    objective = kmedian_objective(ms, roles, sol, active)
                centers = {int(roles.facilities[p])
                           for p in sol.open_positions()}
            bound = bound_factor * res.opt_t
            if active and objective > bound + BOUND_TOL:
                raise StateCorruptionError(
                    f"objective {objective} exceeds bound {bound}", sol)
        except StateCorruptionError as e:
            dump = _state_dump(sol, driver.x, active, t)
            log_lines.append(f"ABORT {e}")
            log_lines.extend(dump.splitlines())
            if out_dir is not None:
                _write_artifacts(out_dir, records, log_lines, None,
                                 TRACE_COLUMNS)
            raise RuntimeError(f"run aborted at step {t}: {e}") from e

        rec_step = len(centers ^ snapshots[-1])
        snapshots.append(centers)
        client_sets.append(cl)
        opts.append(res.opt_t)
        cum_move += res.movement
        cum_rec += rec_step
        records.append(TraceRecord(
            t=t, event=f"{kind}:{pid}", opt_t=res.opt_t,
            integral_objective=objective, bound=bound,
            frac_movement_step=res.movement, frac_movement_cum=cum_move,
            integral_recourse_step=rec_step, integral_recourse_cum=cum_rec,
            num_centers=len(centers)))
        log_lines.append(f"t={t} {kind}:{pid} active={len(active)} "
                         f"opt={res.opt_t!r} objective={objective!r} "
                         f"centers={len(centers)}")
        for e in ev:
            extra = f" reason={e.reason}" if e.reason else ""
            facx = f" facility={e.facility}" if e.facility is not None else ""
            log_lines.append(f"t={t}   {e.kind} subject={e.subject}"
                             f"{extra}{facx}")

    # bookkeeping must agree with the snapshot history it was drawn from
    recomputed = sum(len(a ^ b) for a, b in zip(snapshots, snapshots[1:]))
    if cum_rec != recomputed:
        raise RuntimeError(f"recourse accounting mismatch: "
                           f"{cum_rec} != {recomputed}")

    columns = list(TRACE_COLUMNS)
    if config.offline_comparator and records:
        per_step = offline_recourse_curve(ms, roles, config.problem,
                                          client_sets, opts, config.k,
                                          config.beta)
        cum = np.cumsum(per_step)
        records = [replace(r, comparator_movement_cum=float(cum[i]))
                   for i, r in enumerate(records)]
        columns.append("comparator_movement_cum")

    center_counts = [r.num_centers for r in records]
    modal = int(np.argmax(np.bincount(center_counts))) if records else 0
    ratios = [r.integral_objective / r.bound for r in records if r.bound > 0.0]
    summary = {
        "problem": config.problem, "data": config.data, "k": config.k,
        "beta": config.beta, "eps": config.eps, "T": config.T,
        "p_insert": config.p_insert, "seed": config.seed,
        "n_points": n, "delta": ms.delta,
        "events_inserted": sum(1 for k_, _ in events if k_ == "insert"),
        "events_deleted": sum(1 for k_, _ in events if k_ == "delete"),
        "final_active": len(active),
        "total_frac_movement": cum_move,
        "total_integral_recourse": cum_rec,
        "max_objective_bound_ratio": max(ratios) if ratios else 0.0,
        "max_num_centers": max(center_counts) if records else 0,
        "modal_num_centers": modal,
        "final_num_centers": center_counts[-1] if records else 0,
    }
    if config.offline_comparator and records:
        summary["comparator_total_movement"] = float(
            records[-1].comparator_movement_cum)
    # qualitative expectations are reported, never enforced
    warn_recourse = cum_rec >= config.T / 2
    summary["warn_recourse_not_small"] = bool(warn_recourse)
    if warn_recourse:
        log_lines.append(f"WARN total integral recourse {cum_rec} is not "
                         f"small against T={config.T}")
    if config.problem in ("kcenter", "kmedian"):
        warn_modal = modal > config.k
        summary["warn_modal_centers_above_k"] = bool(warn_modal)
        if warn_modal:
            log_lines.append(f"WARN modal center count {modal} exceeds "
                             f"k={config.k}")

    if out_dir is not None:
        _write_artifacts(out_dir, records, log_lines, summary, columns)
    return records, summary


def offline_recourse_curve(ms: MetricSpace, roles: PointRole, problem: str,
                           client_sets, opts, k: int, beta: float) -> np.ndarray:
    """Per-step l1 movement of the cheapest offline fractional solution.

    One LP over the whole horizon: minimize total movement subject to
    every step being beta-feasible with no resource augmentation (mass
    budget exactly k, cost cap exactly beta times the step optimum).
    Expensive: variable count grows with T * n for k-center and with
    T * n * |clients| for the service formulations, hence the T cap.
    """
    T = len(client_sets)
    if T > MAX_COMPARATOR_T:
        raise ValueError(f"offline comparator is capped at T <= "
                         f"{MAX_COMPARATOR_T}")
    n = roles.facilities.size
    f = roles.opening_cost if problem == "facility" else np.zeros(n)
    fpts = roles.facilities

    # variable layout: T blocks of x, then T blocks of movement slack,
    # then per-step service blocks for the two service problems
    nv = 2 * T * n
    y_off = []
    if problem != "kcenter":
        for cl in client_sets:
            y_off.append(nv)
            nv += cl.size * n

    rows_ub, cols_ub, vals_ub, b_ub = [], [], [], []
    rows_eq, cols_eq, vals_eq, b_eq = [], [], [], []
    nrow_ub = 0
    nrow_eq = 0

    def add_ub(cols, vals, rhs):
        nonlocal nrow_ub
        rows_ub.extend([nrow_ub] * len(cols))
        cols_ub.extend(cols)
        vals_ub.extend(vals)
        b_ub.append(rhs)
        nrow_ub += 1

    def add_eq(cols, vals, rhs):
        nonlocal nrow_eq
        rows_eq.extend([nrow_eq] * len(cols))
        cols_eq.extend(cols)
        vals_eq.extend(vals)
        b_eq.append(rhs)
        nrow_eq += 1

    for t, cl in enumerate(client_sets):
        xo = t * n
        mo = (T + t) * n
        # movement slack on both sides of x^t - x^{t-1} (x^{-1} = 0)
        for i in range(n):
            prev_cols = [] if t == 0 else [(t - 1) * n + i]
            add_ub([xo + i] + prev_cols + [mo + i],
                   [1.0] + [-1.0] * len(prev_cols) + [-1.0], 0.0)
            add_ub([xo + i] + prev_cols + [mo + i],
                   [-1.0] + [1.0] * len(prev_cols) + [-1.0], 0.0)
        if problem == "kcenter":
            add_ub([xo + i for i in range(n)], [1.0] * n, float(k))
            radius = beta * opts[t]
            for j in cl:
                members = np.flatnonzero(ms.dist[j, fpts] <= radius + 1e-9)
                add_ub([xo + i for i in members], [-1.0] * members.size, -1.0)
            continue
        if problem == "kmedian":
            add_ub([xo + i for i in range(n)], [1.0] * n, float(k))
        # service rows: assignment, coupling, and the step cost cap
        yo = y_off[t]
        cost_cols = [xo + i for i in range(n) if f[i] > 0.0]
        cost_vals = [float(f[i]) for i in range(n) if f[i] > 0.0]
        for a, j in enumerate(cl):
            add_eq([yo + a * n + i for i in range(n)], [1.0] * n, 1.0)
            for i in range(n):
                add_ub([yo + a * n + i, xo + i], [1.0, -1.0], 0.0)
            cost_cols.extend(yo + a * n + i for i in range(n))
            cost_vals.extend(float(ms.dist[j, fpts[i]]) for i in range(n))
        add_ub(cost_cols, cost_vals, beta * opts[t])

    c = np.zeros(nv)
    c[T * n:2 * T * n] = 1.0
    bounds = [(0.0, 1.0)] * (T * n) + [(0.0, None)] * (nv - T * n)
    A_ub = csr_matrix((vals_ub, (rows_ub, cols_ub)), shape=(nrow_ub, nv))
    kw = {}
    if nrow_eq:
        kw["A_eq"] = csr_matrix((vals_eq, (rows_eq, cols_eq)),
                                shape=(nrow_eq, nv))
        kw["b_eq"] = np.asarray(b_eq)
    res = linprog(c, A_ub=A_ub, b_ub=np.asarray(b_ub), bounds=bounds,
                  method="highs", **kw)
    if res.status != 0:
        raise RuntimeError(f"offline comparator LP failed: {res.message}")
    m = res.x[T * n:2 * T * n]
    return np.add.reduceat(m, np.arange(0, T * n, n))
