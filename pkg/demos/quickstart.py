"""Minimal end-to-end run: stream 30 events over 40 points, print the tail.

Run from the repo root after installing the package:

    python3 demos/quickstart.py
"""

from dynclust.harness import RunConfig, run


def main():
    cfg = RunConfig(problem="kcenter", data="gaussian:40x2", k=3, T=30,
                    p_insert=0.85, seed=7)
    records, summary = run(cfg)
    print("last five steps (t, event, objective, bound, centers):")
    for r in records[-5:]:
        print(f"  {r.t:3d}  {r.event:<11}  {r.integral_objective:8.3f}  "
              f"{r.bound:8.3f}  {r.num_centers}")
    print()
    print(f"total recourse        {summary['total_integral_recourse']}")
    print(f"max objective/bound   {summary['max_objective_bound_ratio']:.3f}")
    print(f"modal center count    {summary['modal_num_centers']} (k = {cfg.k})")


if __name__ == "__main__":
    main()
