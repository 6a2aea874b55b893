"""Projection onto covering/packing bodies, checked two independent ways.

Frozen instances are checked against hand-computed movement values.  Random
instances are checked against scipy's LP solver on the same split
formulation, and tiny ones additionally against a brute-force 0.01-lattice
scan that involves no LP at all.
"""

from __future__ import annotations


import numpy as np
import pytest

from dynclust.body import (
    Body,
    BodyError,
    InfeasibleBodyError,
    check_fl_separation,
    check_in_body,
    movement_of,
    project,
    repair_y,
)
from oracles import lattice_min_movement, scipy_min_movement


def body3() -> Body:
    return Body(
        num_vars=3,
        weights=np.ones(3),
        cov_A=np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]),
        pack_A=np.array([[1.0, 1.0, 1.0]]),
    )


def test_frozen_shared_middle():
    # middle variable covers both rows: movement exactly 1 from the origin
    x, m = project(body3(), np.zeros(3), eps=0.0)
    assert m == pytest.approx(1.0, abs=1e-9)
    assert x[1] == pytest.approx(1.0, abs=1e-9)
    assert m == pytest.approx(scipy_min_movement(body3(), np.zeros(3), 0.0), abs=1e-7)
    assert m == pytest.approx(lattice_min_movement(body3(), np.zeros(3), 0.0), abs=1e-9)


def test_frozen_forced_drop():
    # packing cap forces the stale unit of mass out: raise 1, lower 1
    prev = np.array([1.0, 0.0, 0.0])
    body = Body(
        num_vars=3,
        weights=np.ones(3),
        cov_A=np.array([[0.0, 1.0, 1.0]]),
        pack_A=np.array([[1.0, 1.0, 1.0]]),
    )
    x, m = project(body, prev, eps=0.0)
    assert m == pytest.approx(2.0, abs=1e-9)
    assert m == pytest.approx(scipy_min_movement(body, prev, 0.0), abs=1e-7)
    assert m == pytest.approx(lattice_min_movement(body, prev, 0.0), abs=1e-9)


def test_relaxation_softens_the_drop():
    # with eps = 1/4 only 3/4 of the stale mass has to go
    prev = np.array([1.0, 0.0, 0.0])
    body = Body(
        num_vars=3,
        weights=np.ones(3),
        cov_A=np.array([[0.0, 1.0, 1.0]]),
        pack_A=np.array([[1.0, 1.0, 1.0]]),
    )
    x, m = project(body, prev, eps=0.25)
    assert m == pytest.approx(1.75, abs=1e-9)
    assert body.pack_A[0] @ x == pytest.approx(1.25, abs=1e-9)


def test_zero_weight_excluded_from_movement():
    # service variable moves for free; only the open variable is charged
    body = Body(
        num_vars=2,
        weights=np.array([1.0, 0.0]),
        cov_A=np.array([[0.0, 1.0]]),
        pack_A=np.zeros((0, 2)),
        coupling=np.array([[1, 0]]),  # var1 <= var0
    )
    x, m = project(body, np.zeros(2), eps=0.0)
    assert x[1] >= 1.0 - 1e-9
    assert x[0] >= x[1] - 1e-9
    assert m == pytest.approx(1.0, abs=1e-9)  # only var0's raise is charged


def test_coupling_enforced():
    body = Body(
        num_vars=2,
        weights=np.ones(2),
        cov_A=np.array([[0.0, 1.0]]),
        pack_A=np.zeros((0, 2)),
        coupling=np.array([[1, 0]]),
    )
    x, _ = project(body, np.zeros(2), eps=0.0)
    assert x[1] <= x[0] + 1e-9


def test_fixed_zero_enforced():
    body = Body(
        num_vars=2,
        weights=np.ones(2),
        cov_A=np.array([[1.0, 1.0]]),
        pack_A=np.zeros((0, 2)),
        fixed_zero=np.array([0]),
    )
    x, m = project(body, np.array([0.7, 0.0]), eps=0.0)
    assert x[0] == 0.0
    assert x[1] >= 1.0 - 1e-9
    assert m == pytest.approx(1.7, abs=1e-9)


def test_infeasible_body_reports_rows():
    body = Body(
        num_vars=2,
        weights=np.ones(2),
        cov_A=np.array([[1.0, 0.0]]),
        pack_A=np.zeros((0, 2)),
        fixed_zero=np.array([0]),
    )
    with pytest.raises(InfeasibleBodyError) as e:
        project(body, np.zeros(2), eps=0.0)
    assert any("covering" in r or "fixed_zero" in r for r in e.value.violated_rows)


def test_idempotence():
    body = body3()
    prev = np.zeros(3)
    x, m1 = project(body, prev, eps=0.1)
    x2, m2 = project(body, x, eps=0.1)
    assert m2 == pytest.approx(0.0, abs=1e-9)
    assert x2 == pytest.approx(x, abs=1e-9)


def test_feasible_prev_stays_put():
    body = body3()
    prev = np.array([0.0, 1.0, 0.0])
    x, m = project(body, prev, eps=0.0)
    assert m == 0.0
    assert x == pytest.approx(prev)


def test_negative_coefficient_rejected():
    with pytest.raises(BodyError):
        Body(num_vars=1, weights=np.ones(1), cov_A=np.array([[-1.0]]), pack_A=np.zeros((0, 1)))


def test_empty_covering_row_rejected():
    with pytest.raises(BodyError):
        Body(num_vars=2, weights=np.ones(2), cov_A=np.array([[0.0, 0.0]]), pack_A=np.zeros((0, 2)))


def test_check_in_body_flags():
    body = body3()
    assert check_in_body(body, np.array([0.0, 1.0, 0.0]), eps=0.0) == []
    bad = check_in_body(body, np.zeros(3), eps=0.0)
    assert "covering[0]" in bad and "covering[1]" in bad
    bad = check_in_body(body, np.array([1.0, 1.0, 1.0]), eps=0.0)
    assert "packing[0]" in bad


@pytest.mark.parametrize("seed", range(15))
def test_random_vs_scipy(seed):
    rng = np.random.default_rng(300 + seed)
    n = int(rng.integers(2, 7))
    ncov = int(rng.integers(1, 4))
    npack = int(rng.integers(0, 3))
    cov = np.zeros((ncov, n))
    for r in range(ncov):
        sup = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
        cov[r, sup] = rng.uniform(0.5, 2.0, size=sup.size)
    pack = rng.uniform(0.0, 1.5, size=(npack, n)) * (rng.random((npack, n)) < 0.7)
    w = rng.uniform(0.0, 2.0, size=n)
    body = Body(num_vars=n, weights=w, cov_A=cov, pack_A=pack)
    prev = rng.uniform(0.0, 1.0, size=n) * (rng.random(n) < 0.6)
    eps = float(rng.choice([0.0, 0.1, 0.25]))
    ref = scipy_min_movement(body, prev, eps)
    if ref is None:
        with pytest.raises(InfeasibleBodyError):
            project(body, prev, eps)
        return
    x, m = project(body, prev, eps)
    assert m == pytest.approx(ref, abs=1e-6)
    assert check_in_body(body, x, eps) == []


@pytest.mark.parametrize("seed", range(5))
def test_random_tiny_vs_lattice(seed):
    # grid-aligned data so the lattice contains an exact optimum
    rng = np.random.default_rng(400 + seed)
    n = 3
    cov = np.zeros((2, n))
    for r in range(2):
        sup = rng.choice(n, size=2, replace=False)
        cov[r, sup] = 1.0
    body = Body(num_vars=n, weights=np.ones(n), cov_A=cov,
                pack_A=np.ones((1, n)) * (rng.random() < 0.5))
    prev = rng.choice([0.0, 0.25, 0.5], size=n)
    eps = float(rng.choice([0.0, 0.25]))
    lat = lattice_min_movement(body, prev, eps)
    x, m = project(body, prev, eps)
    assert lat is not None
    assert m <= lat + 1e-9  # the LP can only do better than any grid point
    assert lat <= m + 1e-9  # and for grid-aligned data it cannot do better


def test_exact_engine_agrees():
    body = body3()
    prev = np.array([0.3, 0.0, 0.2])
    x_f, m_f = project(body, prev, eps=0.1)
    x_e, m_e = project(body, prev, eps=0.1, engine="exact")
    assert m_f == pytest.approx(m_e, abs=1e-9)


# covering-packing separation for service rows


def test_separation_feasible():
    x = np.array([0.6, 0.5])
    Y = np.array([[0.5, 0.5]])
    assert check_fl_separation(x, Y) is None


def test_separation_violated_witness():
    x = np.array([0.3, 0.5])
    Y = np.array([[0.6, 0.4]])
    out = check_fl_separation(x, Y)
    assert out is not None
    client, witness = out
    assert client == 0
    assert list(witness) == [1]
    # the witnessed row really is violated: y on the witness, x off it
    val = Y[client, witness].sum() + x[[i for i in range(2) if i not in witness]].sum()
    assert val == pytest.approx(0.7) and val < 1.0


def test_separation_picks_worst_client():
    x = np.array([0.2, 0.2])
    Y = np.array([[0.9, 0.8], [0.2, 0.1]])
    client, _ = check_fl_separation(x, Y)
    assert client == 1  # sum of mins 0.3 beats 0.4


def test_repair_clips_to_open_mass():
    x = np.array([0.6, 0.5])
    Y = np.array([[1.0, 0.5]])
    Y2 = repair_y(x, Y)
    assert Y2[0] == pytest.approx([0.6, 0.5])
    assert Y2.sum(axis=1).min() >= 1.0 - 1e-9


def test_repair_refuses_when_unfixable():
    x = np.array([0.3, 0.3])
    Y = np.array([[1.0, 0.0]])
    with pytest.raises(BodyError):
        repair_y(x, Y)
