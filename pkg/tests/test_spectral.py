import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from warpcone.actions import rotation_action, trivial_group
from warpcone.embed import distortion, kuratowski_embed
from warpcone.spaces import torus_grid
from warpcone.spectral import (
    Graph,
    cheeger_bounds,
    complete_graph,
    cycle_graph,
    distortion_lower_bound,
    exact_conductance,
    graph_from_edges,
    laplacian_spectra,
    level_graph,
    load_baselines,
    primes_between,
    random_regular_graph,
    schreier_family,
    schreier_graph,
    schreier_level_match,
    spectral_gap,
    write_spectral_csv,
)
from warpcone.warp import build_warped_level


def test_schreier_mod2():
    g = schreier_graph(None, 2, (1, 0))
    assert set(g.vertices) == {(1, 0), (0, 1), (1, 1)}
    i = {v: k for k, v in enumerate(g.vertices)}
    edges = {(g.vertices[a], g.vertices[b], s) for a, b, s in g.edges}
    assert ((1, 0), (1, 0), "T") in edges
    assert ((0, 1), (1, 1), "T") in edges and ((1, 1), (0, 1), "T") in edges
    assert ((1, 0), (0, 1), "R") in edges and ((1, 1), (1, 1), "R") in edges
    assert np.allclose(g.degrees, 4)
    assert g.adjacency[i[(1, 0)], i[(1, 0)]] == 2


@pytest.mark.parametrize("p", [3, 5, 7, 11])
def test_schreier_prime_orbit(p):
    g = schreier_graph(None, p)
    assert g.n == p * p - 1
    assert np.allclose(g.degrees, 4)
    assert spectral_gap(g).components == 1


def test_schreier_trivial_group():
    g = schreier_graph(trivial_group(), 7, (1, 2))
    assert g.n == 1 and g.adjacency.sum() == 0


def test_schreier_errors():
    with pytest.raises(ValueError):
        schreier_graph(None, 1)
    with pytest.raises(ValueError):
        schreier_graph(None, 5, (5, 0))


def test_complete_graph_spectra():
    k2 = spectral_gap(complete_graph(2))
    assert k2.lambda1_comb == pytest.approx(2) and k2.lambda1_norm == pytest.approx(2)
    assert spectral_gap(complete_graph(3)).lambda1_comb == pytest.approx(3)


def test_cheeger_examples():
    lo, hi, h = cheeger_bounds(complete_graph(2))
    assert (lo, hi, h) == pytest.approx((1, 2, 1))
    c4 = cycle_graph(4)
    assert spectral_gap(c4).lambda1_norm == pytest.approx(1)
    lo, hi, h = cheeger_bounds(c4)
    assert (lo, hi, h) == pytest.approx((0.5, 2**0.5, 0.5))


def test_distortion_lower_bound_examples():
    assert distortion_lower_bound(complete_graph(4)) == pytest.approx(1)
    assert distortion_lower_bound(cycle_graph(4)) == pytest.approx(1.5**0.5)
    assert distortion_lower_bound(complete_graph(2)) == pytest.approx(1)


def test_disconnected_graph():
    g = graph_from_edges(4, [(0, 1), (2, 3)])
    rep = spectral_gap(g)
    assert rep.lambda1_norm == 0 and rep.components == 2
    with pytest.raises(ValueError):
        distortion_lower_bound(g)


@settings(max_examples=50, deadline=None)
@given(st.integers(4, 16), st.integers(0, 10_000), st.floats(0.2, 0.9))
def test_cheeger_sandwich_random(n, seed, p):
    rng = np.random.default_rng(seed)
    a = np.triu((rng.random((n, n)) < p).astype(float), 1)
    ring = [(i, (i + 1) % n) for i in range(n)]  # keep it connected
    g = graph_from_edges(n, ring)
    g = Graph(g.adjacency + a + a.T)
    lo, hi, h = cheeger_bounds(g)
    assert lo - 1e-12 <= h <= hi + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 30), st.integers(0, 1000))
def test_laplacian_spectrum_properties(n, seed):
    g = random_regular_graph(n + (n % 2), 3, seed)
    comb, norm = laplacian_spectra(g)
    assert comb.min() >= -1e-9 and norm.min() >= -1e-9 and norm.max() <= 2 + 1e-9
    L = np.diag(g.degrees) - g.adjacency
    assert np.abs(L @ np.ones(g.n)).max() < 1e-8


def test_schreier_family_floor():
    reps = schreier_family([3, 5, 7, 11, 13])
    floor = min(r.lambda1_norm for r in reps)
    assert all(r.family_floor == floor for r in reps)
    assert floor > 0
    stored = load_baselines()["schreier_lambda1_norm"]
    for r in reps:
        assert r.lambda1_norm == pytest.approx(stored[str(r.n)], abs=1e-9)
        assert r.cheeger_lower <= r.cheeger_upper


def test_lower_bound_below_kuratowski_distortion():
    g = cycle_graph(12)
    d = g.metric()
    y = torus_grid(12)
    assert np.allclose(d, 12 * y.dmat)
    rep = distortion(d, kuratowski_embed(y, 2))
    assert distortion_lower_bound(g) <= rep.distortion + 1e-12


def test_schreier_level_match():
    for n, r in ((5, 16), (7, 32)):
        (level, disc, pairs), = schreier_level_match(n, [r])
        assert disc == 0.0 and pairs > 0


def test_level_graph_gap_closes():
    gaps = []
    for r in (8, 16, 32, 64):
        act = rotation_action(torus_grid(r), [(5**0.5 - 1) / 2])
        gaps.append(spectral_gap(level_graph(build_warped_level(act, r))).lambda1_norm)
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_primes():
    assert primes_between(3, 20) == [3, 5, 7, 11, 13, 17, 19]


def test_csv(tmp_path):
    write_spectral_csv(schreier_family([3]), tmp_path / "s.csv")
    head, row = (tmp_path / "s.csv").read_text().splitlines()
    assert head == "n,vertices,lambda1_norm,lambda1_comb,cheeger_lo,cheeger_hi,d_lb"
    assert row.startswith("3,8,")
