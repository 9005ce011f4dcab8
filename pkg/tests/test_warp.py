import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from warpcone.actions import (
    ActionModel,
    antipodal_action,
    cone_action,
    extension_action,
    rotation_action,
    sl2_torus_action,
    trivial_action,
)
from warpcone.spaces import compact_cone, one_point_extension, torus_grid
from warpcone.warp import (
    CapExceeded,
    build_product_level,
    build_warped_level,
    d1_distance,
    faithfulness_radius,
    mileage_bruteforce,
    quotient_metric_check,
    write_dmat_csv,
)

from conftest import assert_metric

GOLDEN = (5**0.5 - 1) / 2


def test_quarter_turn_examples(quarter_turn):
    lvl = build_warped_level(quarter_turn, 10)
    assert lvl.dmat[0, 2] == 1.0
    assert lvl.dmat[0, 4] == 2.0
    assert lvl.snap_error_max == 0.0


def test_trivial_group_is_scaled_base(circle8):
    act = trivial_action(circle8)
    for r in (0.5, 3, 40):
        assert np.allclose(build_warped_level(act, r).dmat, r * circle8.dmat)


def test_mileage_examples(quarter_turn):
    d = quarter_turn.space.dmat
    assert mileage_bruteforce(quarter_turn, 10, 0, 3, 0) == pytest.approx(10 * d[0, 3])
    assert mileage_bruteforce(quarter_turn, 10, 0, 2, 1) == 1.0
    with pytest.raises(CapExceeded):
        mileage_bruteforce(quarter_turn, 10, 0, 2, 100)


def test_oracle_on_twelve_points_three_generators():
    act = rotation_action(torus_grid(12), ["1/12", "1/4", 0.37], moduli=[12, 4, 0])
    lvl = build_warped_level(act, 10)
    for i in range(12):
        for j in range(12):
            assert abs(mileage_bruteforce(act, 10, i, j, 4) - lvl.dmat[i, j]) <= 1e-9


@st.composite
def small_actions(draw):
    n = draw(st.integers(2, 14))
    k = draw(st.integers(1, 3))
    angles = [draw(st.one_of(st.integers(1, n - 1).map(lambda a, n=n: f"{a}/{n}"), st.floats(0.01, 0.99))) for _ in range(k)]
    return rotation_action(torus_grid(n), angles)


@settings(max_examples=25, deadline=None)
@given(small_actions(), st.sampled_from([2.0, 10.0, 50.0]))
def test_dijkstra_matches_oracle(act, r):
    lvl = build_warped_level(act, r)
    n = act.space.n
    for i in range(n):
        for j in range(n):
            assert abs(mileage_bruteforce(act, r, i, j, n - 1) - lvl.dmat[i, j]) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(small_actions(), st.floats(0.5, 60))
def test_level_invariants(act, r):
    lvl = build_warped_level(act, r)
    d = lvl.dmat
    assert (d <= r * act.space.dmat + 1e-12).all()
    for s in act.group.labels:
        tgt, _ = act.generator_targets(s)
        assert (d[np.arange(len(d)), tgt] <= 1 + 1e-12).all()
    assert_metric(d, 1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 14), st.data())
def test_exact_orbit_properties(n, data):
    a = data.draw(st.integers(1, n - 1))
    act = rotation_action(torus_grid(n), [f"{a}/{n}"], moduli=[0])
    r1 = data.draw(st.floats(0.5, 30))
    r2 = data.draw(st.floats(r1, 60))
    d1, d2 = build_warped_level(act, r1).dmat, build_warped_level(act, r2).dmat
    assert (d1 <= d2 + 1e-9).all()
    tgt, _ = act.generator_targets("s")
    assert (np.abs(d1[np.ix_(tgt, tgt)] - d1) <= 2 + 1e-9).all()
    # enlarging the generating set never increases distances
    more = rotation_action(torus_grid(n), [f"{a}/{n}", f"1/{n}"], moduli=[0, 0])
    assert (build_warped_level(more, r1).dmat <= d1 + 1e-9).all()


def test_knn_matches_path_metric_and_falls_back(circle8):
    act = trivial_action(torus_grid(16))
    lvl = build_warped_level(act, 4, "knn(2)")
    assert lvl.base_edge_rule == "knn(2)"
    assert np.allclose(lvl.dmat, 4 * act.space.dmat)
    with pytest.warns(UserWarning):
        lvl = build_warped_level(trivial_action(torus_grid(6, 2)), 4, "knn(1)")
    assert lvl.base_edge_rule == "complete"


def test_cap(circle8):
    with pytest.raises(CapExceeded):
        build_warped_level(trivial_action(torus_grid(20)), 1, cap=10)


def test_d1_examples(circle8):
    act = trivial_action(circle8)
    assert d1_distance(act, 5, ((), 0), ((), 3), 1) == pytest.approx(5 * circle8.dist(0, 3))
    rot = rotation_action(circle8, ["1/8"], [0])
    assert d1_distance(rot, 10, ((), 2), (("s",), 2), 2) == 1.0


def test_d1_diagonal_symmetry():
    # (g, x) -> (g h^-1, h x) preserves d1 on exact orbits
    act = rotation_action(torus_grid(8), ["1/8"], [0])
    L, r = 4, 6.0
    prod = build_product_level(act, r, L)
    idx = lambda k: prod.ball.index[(k,)]
    for (a, x), (b, y) in [((0, 1), (2, 5)), ((1, 0), (-1, 3)), ((0, 4), (1, 4))]:
        base = d1_distance(act, r, ((a,), x), ((b,), y), L, prod)
        moved = d1_distance(act, r, ((a - 1,), (x + 1) % 8), ((b - 1,), (y + 1) % 8), L, prod)
        assert base == pytest.approx(moved)


def test_quotient_check_trivial(circle8):
    assert quotient_metric_check(trivial_action(circle8), 7, 1)["discrepancy"] == 0.0


def test_quotient_check_antipodal():
    act = antipodal_action(torus_grid(16))
    res = quotient_metric_check(act, 10, 2)
    assert res["exact"] and res["discrepancy"] == 0.0
    lvl = build_warped_level(act, 10)
    for x in range(16):
        assert lvl.dmat[x, (x + 8) % 16] == min(10 * 0.5, 1.0)


def test_quotient_check_exact_orbits():
    assert quotient_metric_check(rotation_action(torus_grid(8), ["1/8"], [8]), 10, 4)["discrepancy"] == 0.0
    assert quotient_metric_check(sl2_torus_action(torus_grid(5, 2)), 10, 4)["discrepancy"] <= 1e-9


def test_quotient_check_snapped_within_budget():
    act = rotation_action(torus_grid(64), [GOLDEN])
    res = quotient_metric_check(act, 10, 3)
    assert not res["exact"]
    assert res["discrepancy"] <= res["tolerance"]


def test_faithfulness_trivial_group(circle8):
    rep = faithfulness_radius(trivial_action(circle8), 2, [4, 8])
    assert rep.status == "faithful_at" and rep.R_N == 4


def test_faithfulness_golden_rotation():
    act = rotation_action(torus_grid(128), [GOLDEN])
    radii = [faithfulness_radius(act, N, [4, 8, 16, 32, 64]).R_N for N in (1, 2, 3)]
    assert None not in radii
    assert radii == sorted(radii)


def test_faithfulness_fixed_points():
    base = torus_grid(16)
    act = rotation_action(base, [GOLDEN])
    plus = extension_action(act, one_point_extension(base, 0.5))
    rep = faithfulness_radius(plus, 1, [4, 8, 16])
    assert rep.status == "failure"
    assert rep.witness == (("s",), 16)
    cone = cone_action(act, compact_cone(base, 2))
    rep = faithfulness_radius(cone, 1, [4, 8])
    assert rep.status == "failure" and rep.witness == (("s",), 0)


def test_faithfulness_rows():
    act = rotation_action(torus_grid(16), [GOLDEN])
    plus = extension_action(act, one_point_extension(act.space, 0.5))
    rows = faithfulness_radius(plus, 1, [4]).rows()
    assert rows[-1] == (1, 4.0, "failure", "s@16")


def test_dmat_csv(tmp_path, quarter_turn):
    lvl = build_warped_level(quarter_turn, 10)
    write_dmat_csv(lvl, tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "i,j,distance" and len(lines) == 65
    i, j, v = lines[1 + 2].split(",")
    assert (int(i), int(j), float(v)) == (0, 2, 1.0)


def test_oracle_uses_shortcuts_both_ways():
    # half-turn on 3 points snaps 0 -> 2 and 1 -> 2, so 1 is only reachable backwards along a shortcut
    act = rotation_action(torus_grid(3), [0.5])
    d = build_warped_level(act, 10).dmat
    assert d[0, 1] == 2.0
    assert mileage_bruteforce(act, 10, 0, 1, 2) == 2.0
