"""Run all three problems on one seed, write traces, render the figures.

Writes traces under demos/out/ and figures under demos/out/figs/.  The
figure step needs the companion dynplots package (see plots/).

    python3 demos/make_figures.py
"""

import os

from dynclust.harness import RunConfig, run

OUT = os.path.join(os.path.dirname(__file__), "out")


def main():
    for problem in ("kcenter", "facility", "kmedian"):
        cfg = RunConfig(problem=problem, data="gaussian:60x2", k=3, T=40,
                        p_insert=0.85, seed=11,
                        offline_comparator=(problem == "kcenter"))
        out_dir = os.path.join(OUT, problem)
        _, summary = run(cfg, out_dir)
        print(f"{problem}: recourse {summary['total_integral_recourse']}, "
              f"max ratio {summary['max_objective_bound_ratio']:.3f} "
              f"-> {out_dir}")
    try:
        from dynplots import render
    except ImportError:
        print("dynplots not installed; skipping figures "
              "(pip install -e plots/)")
        return
    figs = render(OUT, os.path.join(OUT, "figs"))
    for f in figs:
        print(f"figure {f}")


if __name__ == "__main__":
    main()
