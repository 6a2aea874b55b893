"""Duel the fractional maintainer against the adaptive tree walk.

The walk descends a separated binary tree, always requesting on the side
holding less fractional mass, forcing movement every level; an offline
solution that knows the walk pays one center move per phase.

    python3 demos/adversary_duel.py
"""

from dynclust.adversary import run_adversary


def main():
    print("height sweep, two phases each (k-center, c=2):")
    print(f"  {'h':>3}  {'movement/phase':>15}  {'comparator':>10}  {'ratio':>7}")
    for h in (4, 5, 6):
        rows = run_adversary("kcenter", h=h, c=2.0, phases=2,
                             beta=1.5, eps=0.125)
        move = sum(r["measured_movement"] for r in rows) / len(rows)
        ratio = sum(r["ratio"] for r in rows) / len(rows)
        print(f"  {h:>3}  {move:>15.3f}  {1:>10}  {ratio:>7.3f}")
    print()
    print("the ratio grows with the tree height: no online algorithm with")
    print("bounded movement per phase can match the offline optimum")


if __name__ == "__main__":
    main()
