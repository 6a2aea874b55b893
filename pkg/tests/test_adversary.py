"""Adaptive duel: walk mechanics, comparator forms, forced movement."""

from __future__ import annotations

import csv

import numpy as np
import pytest

from dynclust.adversary import (
    AdversaryState,
    next_requests_facility,
    next_requests_kcenter,
    next_requests_kmedian,
    run_adversary,
    subtree_mass,
    write_report,
)
from dynclust.metric import build_hst


def make_state(problem, h, c, b=1):
    return AdversaryState(hst=build_hst(h, c), problem=problem, c=c, b=b)


def test_root_step_emits_extreme_leaves():
    st = make_state("kcenter", 3, 2.0)
    adds, removals = next_requests_kcenter(st, np.zeros(8))
    assert adds == [(7, 1), (14, 1)]  # leftmost and rightmost of all 8 leaves
    assert removals == []


def test_uniform_mass_walks_all_right():
    st = make_state("kcenter", 3, 2.0)
    x = np.full(8, 0.125)
    seen = []
    for _ in range(4):
        adds, _ = next_requests_kcenter(st, x)
        seen.append(adds)
    # ties descend right every level, ending at the rightmost leaf
    assert seen[1] == [(11, 1), (14, 1)]
    assert seen[2] == [(13, 1), (14, 1)]
    assert seen[3] == [(14, 1)]


def test_tie_rule_matches_left_heavy():
    st = make_state("kcenter", 2, 2.0)
    x = np.array([1.0, 0.0, 0.0, 0.0])  # all mass far left
    next_requests_kcenter(st, x)
    adds, removals = next_requests_kcenter(st, x)
    # left at least right, so the walk goes right, away from the mass
    assert st.node == 2
    assert adds == [(5, 1), (6, 1)]
    assert removals == [(3, 1), (6, 1)]


def test_phase_exhaustion_clears_and_restarts():
    st = make_state("kcenter", 2, 2.0)
    x = np.full(4, 0.25)
    for _ in range(3):
        next_requests_kcenter(st, x)
    adds, removals = next_requests_kcenter(st, x)
    assert adds == []
    assert removals == [(6, 1)]
    assert st.t == 0 and st.phase == 1


def test_facility_counts_grow_geometrically():
    st = make_state("facility", 3, 1.0)
    x = np.full(8, 0.125)
    adds, _ = next_requests_facility(st, x)
    assert adds == [(0, 1)]  # single client at the root
    next_requests_facility(st, x)
    adds, _ = next_requests_facility(st, x)
    assert adds[0][1] == 16  # (4c)^2 with c=1 at the chosen grandchild
    assert st.hst.depth[adds[0][0]] == 2


def test_kmedian_walk_mirrors_kcenter():
    kc = make_state("kcenter", 3, 2.0)
    km = make_state("kmedian", 3, 2.0)
    x = np.full(8, 0.125)
    for _ in range(4):
        a1, _ = next_requests_kcenter(kc, x)
        a2, _ = next_requests_kmedian(km, x)
        assert a1 == a2


def test_problem_mismatch_rejected():
    st = make_state("kcenter", 2, 2.0)
    with pytest.raises(ValueError):
        next_requests_facility(st, np.zeros(4))


def test_state_validation():
    with pytest.raises(ValueError):
        make_state("vertexcover", 3, 2.0)
    with pytest.raises(ValueError):
        make_state("kcenter", 3, 2.0, b=3)
    with pytest.raises(ValueError):
        make_state("kcenter", 3, 2.0, b=2)  # log2(8) = 3 leaves no height
    with pytest.raises(ValueError):
        make_state("facility", 6, 2.0, b=2)


def test_subtree_mass_slices_leaves():
    hst = build_hst(2, 2.0)
    x = np.array([0.1, 0.2, 0.3, 0.4])
    assert subtree_mass(hst, x, 0) == pytest.approx(1.0)
    assert subtree_mass(hst, x, 1) == pytest.approx(0.3)
    assert subtree_mass(hst, x, 6) == pytest.approx(0.4)


def test_kcenter_duel_forces_movement():
    rows = run_adversary("kcenter", h=6, c=2.0, phases=2, beta=1.5, eps=0.125)
    for r in rows:
        assert r["measured_movement"] >= (6 - 1) / 4.0
        assert r["comparator_recourse"] == 1
        assert r["ratio"] == pytest.approx(r["measured_movement"])


def test_facility_duel_forces_movement():
    rows = run_adversary("facility", h=5, c=2.0, phases=2, beta=1.5, eps=0.125)
    for r in rows:
        assert r["measured_movement"] >= (5 - 1) / 4.0


def test_kmedian_duel_forces_movement():
    rows = run_adversary("kmedian", h=4, c=2.0, phases=2, beta=1.5, eps=0.125)
    for r in rows:
        assert r["measured_movement"] >= (4 - 1) / 4.0


def test_budget_augmentation_shortens_walk():
    st = make_state("kcenter", 6, 2.0, b=2)
    assert st.eff_height == 3  # log2(4b) = 3 levels shaved off
    rows = run_adversary("kcenter", h=6, c=2.0, phases=2, beta=1.5,
                         eps=0.125, b=2)
    for r in rows:
        assert r["measured_movement"] >= (3 - 1) / 4.0


def test_unaugmented_walk_uses_full_height():
    st = make_state("kcenter", 6, 2.0, b=1)
    assert st.eff_height == 6


def test_duel_is_deterministic():
    a = run_adversary("kcenter", h=4, c=2.0, phases=2)
    b = run_adversary("kcenter", h=4, c=2.0, phases=2)
    assert a == b


def test_csv_report_round_trips(tmp_path):
    rows = run_adversary("facility", h=3, c=1.0, phases=2,
                         csv_path=str(tmp_path / "duel.csv"))
    with open(tmp_path / "duel.csv", newline="") as fh:
        back = list(csv.DictReader(fh))
    assert len(back) == len(rows) == 2
    assert list(back[0]) == ["phase", "measured_movement",
                             "comparator_recourse", "ratio", "h", "c"]
    assert float(back[1]["measured_movement"]) == \
        pytest.approx(rows[1]["measured_movement"])
    write_report(rows, str(tmp_path / "again.csv"))
    assert (tmp_path / "again.csv").read_text() == \
        (tmp_path / "duel.csv").read_text()
