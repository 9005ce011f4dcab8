"""Warped metrics on cone levels, the product metric d1 on Gamma x X, and faithfulness radii.

At level r the warped metric is the shortest-path metric of the net with base
edges of weight r*d(x, y) and unit shortcut edges x -- snap(s x).
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .actions import ActionModel, WordBall, inverse_label, word_ball_data
from .spaces import EXACT_TOL

log = logging.getLogger(__name__)

DEFAULT_COMPLETE_CAP = 4000


class CapExceeded(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class WarpedLevel:
    level: float
    action: ActionModel
    graph: np.ndarray = field(repr=False)  # dense weights, inf = no edge
    dmat: np.ndarray = field(repr=False)
    snap_error_max: float
    base_edge_rule: str = "complete"

    @property
    def base(self):
        return self.action.space


def _shortcut_weights(action: ActionModel, n: int) -> np.ndarray:
    w = np.full((n, n), np.inf)
    for s in action.group.labels:
        tgt, _ = action.generator_targets(s)
        src = np.arange(n)
        keep = tgt != src
        w[src[keep], tgt[keep]] = 1.0
    return np.minimum(w, w.T)


def base_weights(action: ActionModel, r: float, rule: str = "complete") -> tuple[np.ndarray, str]:
    d = action.space.dmat
    n = len(d)
    w = r * d
    np.fill_diagonal(w, np.inf)
    if rule == "complete":
        return w, "complete"
    if not rule.startswith("knn"):
        raise ValueError(f"unknown base edge rule {rule!r}")
    k = int(rule[rule.index("(") + 1 : rule.index(")")]) if "(" in rule else 8
    order = np.argsort(w, axis=1, kind="stable")[:, :k]
    keep = np.zeros_like(w, dtype=bool)
    keep[np.repeat(np.arange(n), k), order.ravel()] = True
    keep |= keep.T
    knn = np.where(keep, w, np.inf)
    ncomp, _ = connected_components(np.isfinite(knn), directed=False)
    if ncomp > 1:
        warnings.warn(f"knn({k}) base graph has {ncomp} components; falling back to complete", stacklevel=3)
        return w, "complete"
    return knn, f"knn({k})"


def _apsp(weights: np.ndarray) -> np.ndarray:
    finite = np.isfinite(weights)
    i, j = np.nonzero(finite)
    g = coo_matrix((weights[i, j], (i, j)), shape=weights.shape).tocsr()
    return shortest_path(g, method="D", directed=False)


def build_warped_level(action: ActionModel, r: float, base_edge_rule: str = "complete", cap: int = DEFAULT_COMPLETE_CAP) -> WarpedLevel:
    if r <= 0:
        raise ValueError("level must be positive")
    n = action.space.n
    if base_edge_rule == "complete" and n > cap:
        raise CapExceeded(f"complete base graph on {n} points exceeds the cap of {cap}; use knn(k)")
    base, rule = base_weights(action, r, base_edge_rule)
    graph = np.minimum(base, _shortcut_weights(action, n))
    dmat = _apsp(graph)
    # path sums differ in the last bit between directions
    dmat = np.minimum(dmat, dmat.T)
    np.fill_diagonal(dmat, 0.0)
    err = max((float(action.generator_targets(s)[1].max()) for s in action.group.labels), default=0.0)
    dmat.setflags(write=False)
    return WarpedLevel(float(r), action, graph, dmat, err, rule)


def mileage_bruteforce(action: ActionModel, r: float, x: int, x2: int, max_hops: int, cap: int = 64) -> float:
    """Least mileage r*d(x,x1) + 1 + r*d(s1 x1, x2) + ... + r*d(sk xk, x') over k <= max_hops.

    Evaluated layer by layer over the number of jumps; intermediate points range
    over the net and a jump joins x_i and snap(s_i x_i) in either direction
    (snapped maps need not be inverted by the snapped inverse generator).
    """
    if max_hops > cap:
        raise CapExceeded(f"max_hops {max_hops} exceeds the search cap {cap}")
    d = r * action.space.dmat
    n = len(d)
    jumps = [action.generator_targets(s)[0] for s in action.group.labels]
    # before[y]: cheapest cost to stand at y ready to jump, after k jumps so far
    before = d[x].copy()
    best = d[x, x2]
    for _ in range(max_hops):
        landed = np.full(n, np.inf)
        for tgt in jumps:
            np.minimum.at(landed, tgt, before + 1.0)
            landed = np.minimum(landed, before[tgt] + 1.0)
        best = min(best, float((landed + d[:, x2]).min()))
        before = (landed[:, None] + d).min(axis=0)
    return best


# product metric d1 on Gamma x X ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProductLevel:
    """Gamma x X restricted to B(e, L) x net with the d1 graph at level r."""

    action: ActionModel
    level: float
    ball: WordBall
    images: np.ndarray = field(repr=False)  # images[g, z] = snapped net index of g z
    graph: object = field(repr=False)

    def vertex(self, g_index: int, z: int) -> int:
        return g_index * self.action.space.n + z

    def distances_from(self, sources: Sequence[int]) -> np.ndarray:
        return shortest_path(self.graph, method="D", directed=False, indices=list(sources))


def build_product_level(
    action: ActionModel, r: float, L: int, ball_cap: int = 200_000, vertex_cap: int = 400_000, max_edge: float = np.inf
) -> ProductLevel:
    """Graph of d1 on B(e, L) x net.  Fiber edges longer than ``max_edge`` are dropped,
    which leaves every distance up to ``max_edge`` unchanged."""
    ball = word_ball_data(action.group, L, ball_cap)
    n = action.space.n
    m = len(ball)
    if m * n > vertex_cap:
        raise CapExceeded(f"product graph has {m * n} vertices, over the cap of {vertex_cap}")
    images = np.empty((m, n), dtype=int)
    for gi, word in enumerate(ball.words):
        images[gi] = action.snapped(word)[0]
    rows, cols, vals = [], [], []
    iu, ju = np.triu_indices(n, 1)
    for gi, word in enumerate(ball.words):
        # fiber over g: d1((g, x), (g, x')) = r * d(g x, g x') on exact images
        img = action.image(word)
        w = r * action.space.metric(img, img)[iu, ju]
        keep = w <= max_edge
        rows.append(gi * n + iu[keep])
        cols.append(gi * n + ju[keep])
        vals.append(w[keep])
    group = action.group
    z = np.arange(n)
    for gi, g in enumerate(ball.elements):
        # distinct labels may name the same element (s = s^-1 in Z/2); one edge each
        targets = {ball.index.get(group.mul(group.gens[s], g)) for s in group.labels}
        for hi in sorted(t for t in targets if t is not None):
            if hi > gi:
                rows.append(gi * n + z)
                cols.append(hi * n + z)
                vals.append(np.ones(n))
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    graph = coo_matrix((vals, (rows, cols)), shape=(m * n, m * n)).tocsr()
    return ProductLevel(action, float(r), ball, images, graph)


def _inverse_word(word):
    return tuple(inverse_label(s) for s in reversed(word))


def d1_distance(action: ActionModel, r: float, p, q, L: int, product: Optional[ProductLevel] = None) -> float:
    """d1((g, x), (g', x')) with group coordinates given as words or elements inside B(e, L)."""
    prod = product or build_product_level(action, r, L)
    ball = prod.ball

    def idx(g):
        if isinstance(g, tuple) and all(isinstance(s, str) for s in g):
            g = action.group.evaluate(g)
        if g not in ball:
            raise CapExceeded("group element outside the word ball B(e, L)")
        return ball.index[g]

    (g1, x1), (g2, x2) = p, q
    src = prod.vertex(idx(g1), x1)
    return float(prod.distances_from([src])[0, prod.vertex(idx(g2), x2)])


def quotient_metric_check(action: ActionModel, r: float, L: int, level: Optional[WarpedLevel] = None) -> dict:
    """Compare d_Gamma(x, x') with min over g in B(e, L) of d1((e, x), (g, g^-1 x')) on all net pairs."""
    level = level or build_warped_level(action, r)
    prod = build_product_level(action, r, L)
    n = action.space.n
    ball = prod.ball
    inv_images = np.empty((len(ball), n), dtype=int)
    for gi, word in enumerate(ball.words):
        inv_images[gi] = action.snapped(_inverse_word(word))[0]
    e = ball.index[action.group.identity]
    dist = prod.distances_from([prod.vertex(e, x) for x in range(n)])
    cols = np.arange(len(ball))[:, None] * n + inv_images  # (m, n): vertex of (g, g^-1 x')
    upstairs = dist[:, cols].min(axis=1)  # (n, n)
    disc = np.abs(upstairs - level.dmat)
    i, j = np.unravel_index(np.argmax(disc), disc.shape)
    tol = 2 * L * action.max_lipschitz * action.space.mesh * r
    return {
        "discrepancy": float(disc.max()),
        "witness": (int(i), int(j)),
        "tolerance": tol,
        "exact": action.is_exact(ball),
        "upstairs": upstairs,
    }


# faithfulness -------------------------------------------------------------


@dataclass(frozen=True)
class FaithfulnessReport:
    N: int
    epsilon: float
    R_N: Optional[float]
    status: str  # faithful_at | failure | undetermined
    witness: Optional[tuple] = None  # (word, point) with word acting trivially on point
    levels_tested: tuple = ()
    max_level: Optional[float] = None

    def rows(self):
        w = "" if self.witness is None else f"{'.'.join(self.witness[0])}@{self.witness[1]}"
        return [(self.N, lvl, st, w) for lvl, st in self.levels_tested]


def injectivity_radius(action: ActionModel, radius: int) -> float:
    """Half the least displacement d(y, g y) over net points and g != e in B(e, 2*radius)."""
    ball = word_ball_data(action.group, 2 * radius)
    best = np.inf
    coords = action.space.coords
    for word in ball.words[1:]:
        disp = np.diagonal(action.space.metric(action.image(word), coords))
        best = min(best, float(disp.min()))
    return best / 2 if np.isfinite(best) else np.inf


def fixed_point_witness(action: ActionModel, N: int):
    """Shortest (word, point) with a nontrivial word fixing the point exactly, if any within B(e, N)."""
    ball = word_ball_data(action.group, N)
    coords = action.space.coords
    for word in ball.words[1:]:
        disp = np.diagonal(action.space.metric(action.image(word), coords))
        hit = np.flatnonzero(disp <= EXACT_TOL)
        if len(hit):
            return word, int(hit[0])
    return None


def faithfulness_radius(action: ActionModel, N: int, level_schedule: Sequence[float], L: Optional[int] = None) -> FaithfulnessReport:
    """First scheduled level where the quotient map is injective and isometric on d1-balls of radius N.

    Balls are centred at (e, x) for every net point x (the diagonal action is
    isometric).  A collision (e, z) ~ (g, z) with g z = z exactly is a genuine
    fixed point and ends the search with a failure witness.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    L = N + 2 if L is None else L
    eps = injectivity_radius(action, N)
    n = action.space.n
    tested = []
    for r in level_schedule:
        prod = build_product_level(action, r, L, max_edge=2 * N + 1)
        level = build_warped_level(action, r)
        e = prod.ball.index[action.group.identity]
        dist = prod.distances_from([prod.vertex(e, x) for x in range(n)])
        images = prod.images.ravel()
        tol = 2 * N * action.max_lipschitz * action.space.mesh * r + 1e-9
        ok = True
        for x in range(n):
            inball = np.flatnonzero(dist[x] <= N + 1e-9)
            img = images[inball]
            if len(np.unique(img)) < len(img):
                ok = False
                wit = _collision_witness(action, prod, inball, img)
                if wit is not None:
                    tested.append((float(r), "failure"))
                    return FaithfulnessReport(N, eps, None, "failure", wit, tuple(tested), float(r))
                continue
            if ok:
                sub = prod.distances_from(inball)[:, inball]
                down = level.dmat[np.ix_(img, img)]
                ok = np.abs(sub - down).max() <= tol
        tested.append((float(r), "faithful" if ok else "not_yet"))
        if ok:
            return FaithfulnessReport(N, eps, float(r), "faithful_at", None, tuple(tested), float(r))
    return FaithfulnessReport(N, eps, None, "undetermined", None, tuple(tested), float(max(level_schedule)))


def _collision_witness(action, prod, vertices, img):
    """A pair (g1, z), (g2, z) with g1 z = g2 z exactly gives g1^-1 g2 fixing z."""
    n = action.space.n
    coords = action.space.coords
    order = np.argsort(img, kind="stable")
    for a, b in zip(order, order[1:]):
        if img[a] != img[b]:
            continue
        (g1, z1), (g2, z2) = divmod(int(vertices[a]), n), divmod(int(vertices[b]), n)
        if z1 != z2:
            continue
        word = prod.ball.words[g2] + _inverse_word(prod.ball.words[g1])
        g = action.group.evaluate(word)
        if g == action.group.identity:
            continue
        moved = action.image(word, coords[z1 : z1 + 1])
        if action.space.metric(moved, coords[z1 : z1 + 1])[0, 0] <= EXACT_TOL:
            short = word_ball_data(action.group, len(word))
            words = [short.words[short.index[g]], short.words[short.index[action.group.inv(g)]]]
            best = min(words, key=lambda w: (len(w), sum(s.endswith("^-1") for s in w), w))
            return best, z1
    return None


# export ---------------------------------------------------------------------


def write_dmat_csv(level: WarpedLevel, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "distance"])
        n = len(level.dmat)
        for i in range(n):
            for j in range(n):
                w.writerow([i, j, repr(float(level.dmat[i, j]))])
