"""Command-line front end: experiment runs, adversary duels, self checks."""

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .adversary import run_adversary
from .harness import RunConfig, generate_stream, load_dataset, run
from .metric import from_feature_rows


def _run_job(job):
    cfg, out_dir = job
    _, summary = run(cfg, out_dir)
    return summary


def _cmd_run(args) -> int:
    jobs = []
    for seed in args.seed:
        cfg = RunConfig(problem=args.problem, data=args.data, k=args.k,
                        beta=args.beta, eps=args.eps, T=args.T,
                        p_insert=args.p_insert, seed=seed,
                        facility_cost=args.facility_cost,
                        offline_comparator=args.offline_comparator)
        out_dir = (args.out if len(args.seed) == 1
                   else os.path.join(args.out, f"seed_{seed}"))
        jobs.append((cfg, out_dir))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(_run_job, jobs))
    else:
        summaries = [_run_job(job) for job in jobs]
    for (cfg, out_dir), summ in zip(jobs, summaries):
        print(f"seed {cfg.seed}: inserted={summ['events_inserted']} "
              f"deleted={summ['events_deleted']} "
              f"recourse={summ['total_integral_recourse']} "
              f"max_ratio={summ['max_objective_bound_ratio']:.4f} "
              f"centers_max={summ['max_num_centers']} -> {out_dir}")
    return 0


def _cmd_adversary(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    rows = run_adversary(args.problem, h=args.height, c=args.c,
                         phases=args.phases, beta=args.beta, eps=args.eps,
                         k=args.k, b=args.b,
                         csv_path=os.path.join(args.out, "adversary.csv"))
    for row in rows:
        print(f"phase {row['phase']}: movement={row['measured_movement']:.4f} "
              f"comparator={row['comparator_recourse']} "
              f"ratio={row['ratio']:.4f}")
    return 0


def _check_metric_normalization():
    pts = np.array([[0.0, 0.0], [0.0, 3.0], [4.0, 0.0], [4.0, 3.0],
                    [0.0, 3.0]])
    ms = from_feature_rows(pts)
    d = ms.dist
    off = d[d > 0.0]
    assert abs(off.min() - 1.0) < 1e-12
    assert np.allclose(d, d.T)
    assert ms.delta == off.max()


def _check_stream_contract():
    pool = np.zeros((10, 2))
    assert generate_stream(pool, 8, 0.6, seed=1) == \
        generate_stream(pool, 8, 0.6, seed=1)
    kinds = [k for k, _ in generate_stream(pool, 6, 0.0, seed=0)]
    assert kinds == ["insert", "delete"] * 3


def _check_dataset_loader():
    pts = load_dataset("gaussian:16x3", seed=7)
    assert pts.shape == (16, 3)
    assert np.array_equal(pts, load_dataset("gaussian:16x3", seed=7))


def _small_run(problem):
    cfg = RunConfig(problem=problem, data="gaussian:28x2", k=3, T=20,
                    p_insert=0.8, seed=0)
    records, summary = run(cfg)
    assert len(records) == 20
    assert summary["total_integral_recourse"] >= 0


def _check_comparator_lp():
    cfg = RunConfig(problem="kcenter", data="gaussian:15x2", k=2, T=8,
                    p_insert=0.9, seed=5, offline_comparator=True)
    records, _ = run(cfg)
    cum = [r.comparator_movement_cum for r in records]
    assert all(b >= a - 1e-9 for a, b in zip(cum, cum[1:]))


def _check_adversary_duel():
    rows = run_adversary("kcenter", h=4, c=2.0, phases=1)
    assert rows[0]["measured_movement"] > 0.0
    assert rows[0]["comparator_recourse"] == 1


SELFTEST = [
    ("metric_normalization", _check_metric_normalization),
    ("stream_contract", _check_stream_contract),
    ("dataset_loader", _check_dataset_loader),
    ("run_kcenter", lambda: _small_run("kcenter")),
    ("run_facility", lambda: _small_run("facility")),
    ("run_kmedian", lambda: _small_run("kmedian")),
    ("offline_comparator", _check_comparator_lp),
    ("adversary_duel", _check_adversary_duel),
]


def _cmd_selftest(args) -> int:
    # every run above executes the full per-step invariant battery and the
    # recourse cross-check internally; completing is the test
    failed = 0
    for name, fn in SELFTEST:
        try:
            fn()
        except Exception as exc:
            failed += 1
            print(f"FAIL {name}: {exc}")
        else:
            print(f"ok {name}")
    print(f"{len(SELFTEST) - failed}/{len(SELFTEST)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dynclust",
        description="Fully dynamic clustering with bounded recourse")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="execute an experiment run")
    pr.add_argument("--problem", required=True,
                    choices=["kcenter", "facility", "kmedian"])
    pr.add_argument("--data", default="gaussian:200x2",
                    help="CSV of feature rows, or gaussian:NxD")
    pr.add_argument("--k", type=int, default=4)
    pr.add_argument("--beta", type=float, default=1.5)
    pr.add_argument("--eps", type=float, default=0.25)
    pr.add_argument("--T", type=int, default=100)
    pr.add_argument("--p-insert", dest="p_insert", type=float, default=0.9)
    pr.add_argument("--seed", type=int, nargs="+", default=[0],
                    help="one or more seeds; several write out/seed_N")
    pr.add_argument("--out", required=True)
    pr.add_argument("--facility-cost", dest="facility_cost",
                    default="uniform:delta/2")
    pr.add_argument("--offline-comparator", action="store_true",
                    help="add the horizon-LP movement column (T <= 100)")
    pr.add_argument("--jobs", type=int, default=1,
                    help="run seeds in parallel processes")
    pr.set_defaults(fn=_cmd_run)

    pa = sub.add_parser("adversary", help="run a lower-bound duel")
    pa.add_argument("--problem", required=True,
                    choices=["kcenter", "facility", "kmedian"])
    pa.add_argument("--height", type=int, required=True)
    pa.add_argument("--c", type=float, required=True)
    pa.add_argument("--phases", type=int, required=True)
    pa.add_argument("--out", required=True)
    pa.add_argument("--beta", type=float, default=1.5)
    pa.add_argument("--eps", type=float, default=0.125)
    pa.add_argument("--k", type=int, default=1)
    pa.add_argument("--b", type=int, default=1)
    pa.set_defaults(fn=_cmd_adversary)

    ps = sub.add_parser("selftest",
                        help="invariant and property checks on built-ins")
    ps.set_defaults(fn=_cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
