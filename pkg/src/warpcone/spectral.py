"""Schreier graphs, Laplacian spectral gaps, Cheeger bounds and Poincare distortion bounds."""

from __future__ import annotations

import csv
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components, shortest_path

from .actions import GroupPresentation, sl2z_group


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected multigraph as a symmetric adjacency matrix; a loop at v adds 2 to A[v, v]."""

    adjacency: np.ndarray = field(repr=False)
    labels: tuple = ()

    @property
    def n(self) -> int:
        return len(self.adjacency)

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def edge_count(self) -> float:
        """Edges between distinct vertices, with multiplicity."""
        return float(np.triu(self.adjacency, 1).sum())

    def metric(self) -> np.ndarray:
        a = self.adjacency.copy()
        np.fill_diagonal(a, 0)
        return shortest_path(a > 0, method="D", directed=False, unweighted=True)


def graph_from_edges(n: int, edges) -> Graph:
    a = np.zeros((n, n))
    for u, v in edges:
        a[u, v] += 1
        a[v, u] += 1
    return Graph(a)


def complete_graph(n: int) -> Graph:
    return Graph(np.ones((n, n)) - np.eye(n))


def cycle_graph(n: int) -> Graph:
    return graph_from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def random_regular_graph(n: int, degree: int, seed: int) -> Graph:
    import networkx as nx

    g = nx.random_regular_graph(degree, n, seed=seed)
    return Graph(nx.to_numpy_array(g, nodelist=range(n)))


@dataclass(frozen=True, eq=False)
class SchreierGraph(Graph):
    edges: tuple = ()
    modulus: int = 0

    @property
    def vertices(self) -> tuple:
        return self.labels


def _mat_vec(m, v, n):
    a, b, c, d = m
    x, y = v
    return ((a * x + b * y) % n, (c * x + d * y) % n)


def schreier_graph(group: Optional[GroupPresentation] = None, n: int = 2, basepoint=(1, 0)) -> SchreierGraph:
    """Orbit graph of a residue pair under 2x2 integer generators acting mod n.

    One undirected edge v -- s v per vertex and base generator s; inverses
    traverse the same edges, so the graph is 2|S|-regular with loops counted twice.
    """
    group = group or sl2z_group()
    if n < 2:
        raise ValueError("modulus must be at least 2")
    base = (basepoint[0] % n, basepoint[1] % n)
    if base == (0, 0):
        raise ValueError("basepoint must be nonzero")
    names = group.base_labels
    seen = {base: 0}
    order = [base]
    queue = deque([base])
    while queue:
        v = queue.popleft()
        for s in group.labels:
            w = _mat_vec(group.gens[s], v, n)
            if w not in seen:
                seen[w] = len(order)
                order.append(w)
                queue.append(w)
    edges = []
    a = np.zeros((len(order), len(order)))
    for v in order:
        for s in names:
            w = _mat_vec(group.gens[s], v, n)
            i, j = seen[v], seen[w]
            edges.append((i, j, s))
            a[i, j] += 1
            a[j, i] += 1
    return SchreierGraph(a, tuple(order), tuple(edges), n)


@dataclass(frozen=True)
class SpectralReport:
    n: int
    vertex_count: int
    lambda1_norm: float
    lambda1_comb: float
    cheeger_lower: float
    cheeger_upper: float
    components: int = 1
    exact_h: Optional[float] = None
    d_lb: Optional[float] = None
    family_floor: Optional[float] = None

    def row(self):
        return (self.n, self.vertex_count, self.lambda1_norm, self.lambda1_comb, self.cheeger_lower, self.cheeger_upper, self.d_lb)


def laplacians(graph: Graph) -> tuple[np.ndarray, np.ndarray]:
    a = graph.adjacency
    deg = graph.degrees
    comb = np.diag(deg) - a
    inv = np.where(deg > 0, 1 / np.sqrt(np.where(deg > 0, deg, 1)), 0.0)
    norm = np.eye(len(a)) - inv[:, None] * a * inv[None, :]
    return comb, norm


def laplacian_spectra(graph: Graph) -> tuple[np.ndarray, np.ndarray]:
    comb, norm = laplacians(graph)
    return np.linalg.eigvalsh(comb), np.linalg.eigvalsh(norm)


def spectral_gap(graph: Graph, n: int = 0) -> SpectralReport:
    """Second-smallest eigenvalues of the combinatorial and normalized Laplacians.

    Disconnected graphs report zero gaps together with their component count.
    """
    ncomp, _ = connected_components(graph.adjacency > 0, directed=False)
    if graph.n < 2:
        return SpectralReport(n, graph.n, 0.0, 0.0, 0.0, 0.0, ncomp)
    if graph.n > 5000:
        raise ValueError("dense eigensolve limited to 5000 vertices")
    comb, norm = laplacian_spectra(graph)
    l_comb = 0.0 if ncomp > 1 else max(float(comb[1]), 0.0)
    l_norm = 0.0 if ncomp > 1 else max(float(norm[1]), 0.0)
    return SpectralReport(n, graph.n, l_norm, l_comb, l_norm / 2, float(np.sqrt(2 * l_norm)), ncomp)


def exact_conductance(graph: Graph, chunk: int = 1 << 14) -> float:
    """min over S with 0 < vol(S) <= vol(V)/2 of |E(S, S^c)| / vol(S), by exhaustive scan."""
    n = graph.n
    if n > 20:
        raise ValueError("exhaustive cut scan limited to 20 vertices")
    a = graph.adjacency
    deg = graph.degrees
    total = deg.sum()
    bits = 1 << np.arange(n)
    best = np.inf
    # subsets containing the last vertex are complements of ones that do not
    for start in range(1, 1 << n, chunk):
        masks = np.arange(start, min(start + chunk, 1 << n))
        x = ((masks[:, None] & bits[None, :]) > 0).astype(float)
        vol = x @ deg
        inner = np.einsum("ij,jk,ik->i", x, a, x)
        cut = vol - inner
        ok = (vol > 0) & (vol <= total / 2)
        if ok.any():
            best = min(best, float((cut[ok] / vol[ok]).min()))
    return best


def cheeger_bounds(graph: Graph, exact: Optional[bool] = None) -> tuple[float, float, Optional[float]]:
    rep = spectral_gap(graph)
    if exact is None:
        exact = graph.n <= 20
    h = exact_conductance(graph) if exact else None
    return rep.cheeger_lower, rep.cheeger_upper, h


def distortion_lower_bound(graph: Graph, metric: Optional[np.ndarray] = None) -> float:
    """sqrt(lambda1_comb * sum_{u<v} d(u,v)^2 / (|V| |E|)): least distortion of any l2 embedding."""
    rep = spectral_gap(graph)
    if rep.components > 1:
        raise ValueError("graph must be connected")
    d = graph.metric() if metric is None else metric
    pair_sum = float(np.triu(d, 1).__pow__(2).sum())
    return float(np.sqrt(rep.lambda1_comb * pair_sum / (graph.n * graph.edge_count)))


def schreier_family(moduli: Sequence[int], group: Optional[GroupPresentation] = None, with_bound: bool = True) -> list[SpectralReport]:
    reports = []
    for n in moduli:
        g = schreier_graph(group, n, (1, 0))
        rep = spectral_gap(g, n)
        d_lb = distortion_lower_bound(g) if with_bound else None
        reports.append(SpectralReport(**{**rep.__dict__, "d_lb": d_lb}))
    floor = min(r.lambda1_norm for r in reports)
    return [SpectralReport(**{**r.__dict__, "family_floor": floor}) for r in reports]


def primes_between(lo: int, hi: int) -> list[int]:
    return [p for p in range(max(lo, 2), hi + 1) if all(p % q for q in range(2, int(p**0.5) + 1))]


def level_graph(level) -> Graph:
    """Unit-scale graph of a warped level: base edges of cost <= 1 plus generator shortcuts."""
    a = np.zeros_like(level.dmat)
    base = level.level * level.action.space.dmat
    a[(base <= 1 + 1e-9) & (base > 0)] = 1.0
    for s in level.action.group.base_labels:
        tgt, _ = level.action.generator_targets(s)
        for i, j in enumerate(tgt):
            a[i, j] += 1
            a[j, i] += 1
    return Graph(a)


def write_spectral_csv(reports: Sequence[SpectralReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "vertices", "lambda1_norm", "lambda1_comb", "cheeger_lo", "cheeger_hi", "d_lb"])
        for r in reports:
            w.writerow([r.n, r.vertex_count, *(repr(float(v)) if v is not None else "" for v in r.row()[2:])])


def schreier_level_match(n: int, levels: Sequence[float], max_dist: int = 3) -> list[tuple[float, float, int]]:
    """Compare warped SL2 levels on the n-lattice of T^2 with the Schreier graph of (1, 0) mod n.

    Returns (r, max |d_warped - d_graph| over orbit pairs with d_graph <= max_dist, pairs compared).
    """
    from .actions import sl2_torus_action
    from .spaces import torus_grid
    from .warp import build_warped_level

    g = schreier_graph(None, n, (1, 0))
    dg = g.metric()
    idx = np.array([a * n + b for a, b in g.vertices])
    act = sl2_torus_action(torus_grid(n, 2))
    near = (dg <= max_dist) & np.isfinite(dg)
    out = []
    for r in levels:
        dw = build_warped_level(act, r).dmat[np.ix_(idx, idx)]
        out.append((float(r), float(np.abs(dw - dg)[near].max()), int(near.sum())))
    return out


BASELINE_FILE = "baselines.json"


def load_baselines() -> dict:
    """Committed Schreier-family floor, per-modulus gaps and cycle-control bounds."""
    import json
    from importlib import resources

    return json.loads(resources.files("warpcone").joinpath("data", BASELINE_FILE).read_text())
