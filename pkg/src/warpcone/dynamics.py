"""Truncated negative-type kernels on Gamma x Y and the property-A to amenable-action transfer."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .actions import ActionModel, WordBall, word_ball_data
from .embed import EmbeddingTable
from .spaces import EXACT_TOL


@dataclass(frozen=True, eq=False)
class KernelData:
    ball: WordBall
    levels: tuple[float, ...]
    k_tables: tuple = field(repr=False)  # per level: ||F(x) - F(x')||^2 on the net
    weights: tuple[float, ...] = ()
    h_table: np.ndarray = field(default=None, repr=False)  # (|ball|, n)
    images: np.ndarray = field(default=None, repr=False)  # snapped g y, (|ball|, n)
    exact: bool = True

    def h(self, g, y: int) -> float:
        return float(self.h_table[self.ball.index[g], y])


def truncated_kernel(action: ActionModel, levels: Sequence[float], embeddings: Sequence[EmbeddingTable], word_radius: int) -> KernelData:
    """h(g, y) = sum_n 2^-n ||F_n(y) - F_n(g y)||^2 over g in B(e, word_radius).

    Every level shares the action's net; ``embeddings[n]`` embeds the level r_n.
    """
    if len(levels) != len(embeddings):
        raise ValueError("one embedding per level is required")
    n = action.space.n
    for table in embeddings:
        if len(table) != n:
            raise ValueError("embedding does not cover the level net")
    ball = word_ball_data(action.group, word_radius)
    images = np.empty((len(ball), n), dtype=int)
    exact = True
    for gi, word in enumerate(ball.words):
        images[gi], err = action.snapped(word)
        exact &= not err.any()
    ks = tuple(t.pairwise() ** 2 for t in embeddings)
    weights = tuple(2.0 ** -(i + 1) for i in range(len(levels)))
    h = np.zeros((len(ball), n))
    y = np.arange(n)
    for w, k in zip(weights, ks):
        h += w * k[y[None, :], images]
    return KernelData(ball, tuple(map(float, levels)), ks, weights, h, images, exact)


def kernel_invariants(kernel: KernelData) -> dict:
    """Normalisation, nonnegativity and max |h(g, y) - h(g^-1, g y)| over the table."""
    ball = kernel.ball
    group = ball.group
    e = ball.index[group.identity]
    sym = 0.0
    for gi, g in enumerate(ball.elements):
        inv = ball.index.get(group.inv(g))
        if inv is None:
            continue
        sym = max(sym, float(np.abs(kernel.h_table[gi] - kernel.h_table[inv, kernel.images[gi]]).max()))
    return {
        "h_identity_max": float(np.abs(kernel.h_table[e]).max()),
        "h_min": float(kernel.h_table.min()),
        "symmetry_max": sym,
    }


def quadratic_form(kernel: KernelData, lam: np.ndarray, support: Sequence[int], y: int) -> Optional[float]:
    """sum lam_g lam_g' h(g' g^-1, g y); None if some g' g^-1 lies outside the table."""
    ball = kernel.ball
    group = ball.group
    total = 0.0
    for a, gi in enumerate(support):
        g = ball.elements[gi]
        gy = kernel.images[gi, y]
        ginv = group.inv(g)
        for b, hi in enumerate(support):
            k = ball.index.get(group.mul(ball.elements[hi], ginv))
            if k is None:
                return None
            total += lam[a] * lam[b] * kernel.h_table[k, gy]
    return total


def negative_definite_check(kernel: KernelData, trials: int, seed: int, support_radius: Optional[int] = None) -> dict:
    """Largest quadratic form over random zero-sum vectors on B(e, support_radius) and all base points.

    Trials whose products g' g^-1 leave the table are skipped and counted.
    """
    ball = kernel.ball
    R = ball.radius // 2 if support_radius is None else support_radius
    support = [i for i, l in enumerate(ball.lengths) if l <= R]
    rng = np.random.Generator(np.random.Philox(seed))
    n = kernel.h_table.shape[1]
    # H[y][a, b] = h(g_b g_a^-1, g_a y) for the support, assembled once
    group = ball.group
    prod_idx = np.full((len(support), len(support)), -1)
    for a, gi in enumerate(support):
        ginv = group.inv(ball.elements[gi])
        for b, hi in enumerate(support):
            prod_idx[a, b] = ball.index.get(group.mul(ball.elements[hi], ginv), -1)
    complete = (prod_idx >= 0).all()
    worst = -np.inf
    skipped = 0
    for _ in range(trials):
        lam = rng.standard_normal(len(support))
        lam -= lam.mean()
        if not complete:
            skipped += 1
            continue
        for y in range(n):
            gy = kernel.images[support, y]
            H = kernel.h_table[prod_idx, gy[:, None]]
            worst = max(worst, float(lam @ H @ lam))
    return {"max_violation": max(worst, 0.0) if np.isfinite(worst) else 0.0, "max_form": worst, "skipped": skipped, "support": len(support)}


# transfer -------------------------------------------------------------------


class TransferRefused(ValueError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True, eq=False)
class TransferResult:
    measures: np.ndarray = field(repr=False)  # (n, |B(e, m+2)|)
    ball: WordBall = field(repr=False)
    defect: float
    rhs: float  # max_y,s ||A(y) - A(sy)||_1
    mass_deficit_max: float
    params: dict = field(default_factory=dict)
    witness: Optional[tuple] = None  # (y, s) attaining the defect

    def row(self):
        p = self.params
        return (p.get("n", 0), p["m"], p["r"], p["delta"], self.defect, self.mass_deficit_max)


def _l1_translated(ball: WordBall, cy: np.ndarray, csy: np.ndarray, s_elem) -> float:
    """|| C^y s^-1 - C^{sy} ||_1 with (mu g)(A) = mu(A g^-1), i.e. (C s^-1)(g) = C(g s)."""
    group = ball.group
    s_inv = group.inv(s_elem)
    shifted: dict = {}
    for gi in np.flatnonzero(cy):
        key = group.mul(ball.elements[gi], s_inv)
        shifted[key] = shifted.get(key, 0.0) + cy[gi]
    other = {ball.elements[gi]: csy[gi] for gi in np.flatnonzero(csy)}
    keys = set(shifted) | set(other)
    return float(sum(abs(shifted.get(k, 0.0) - other.get(k, 0.0)) for k in keys))


def roe_transfer(action: ActionModel, r: float, A: np.ndarray, delta: float, m: int, epsilon: Optional[float] = None, n_index: int = 0) -> TransferResult:
    """C^y(g) = A(y)(delta-ball around g y) for g in B(e, m+2), without renormalisation.

    ``A[y]`` is a probability vector over the net (the level rY shares it).
    ``delta`` is in base-metric units.  Refuses when ``delta`` exceeds the
    injectivity radius ``epsilon`` (open balls of that radius are disjoint) or when the delta-balls around g y overlap
    for distinct g.
    """
    A = np.asarray(A, dtype=float)
    n = action.space.n
    if A.shape != (n, n):
        raise ValueError("A must hold one probability vector over the net per net point")
    if (A < -1e-15).any() or np.abs(A.sum(axis=1) - 1).max() > 1e-9:
        raise ValueError("rows of A must be probability vectors")
    if epsilon is not None and delta > epsilon + EXACT_TOL:
        raise TransferRefused(f"delta={delta} exceeds the injectivity threshold {epsilon}")
    ball = word_ball_data(action.group, m + 2)
    d = action.space.dmat
    images = np.empty((len(ball), n), dtype=int)
    for gi, word in enumerate(ball.words):
        images[gi] = action.snapped(word)[0]
    near = d < delta  # near[c] = net points in the open delta-ball around c
    C = np.zeros((n, len(ball)))
    for y in range(n):
        owner = np.full(n, -1)
        for gi in range(len(ball)):
            pts = np.flatnonzero(near[images[gi, y]])
            clash = pts[owner[pts] >= 0]
            if len(clash):
                other = ball.words[owner[clash[0]]]
                raise TransferRefused(
                    f"delta-balls around {other} y and {ball.words[gi]} y overlap at net point {clash[0]} (y={y})",
                    witness=(y, other, ball.words[gi], int(clash[0])),
                )
            owner[pts] = gi
            C[y, gi] = A[y, pts].sum()
    deficit = float((1 - C.sum(axis=1)).max())
    defect, rhs, wit = 0.0, 0.0, None
    for s in action.group.labels:
        tgt, _ = action.generator_targets(s)
        s_elem = action.group.gens[s]
        for y in range(n):
            val = _l1_translated(ball, C[y], C[tgt[y]], s_elem)
            if val > defect:
                defect, wit = val, (y, s)
            rhs = max(rhs, float(np.abs(A[y] - A[tgt[y]]).sum()))
    return TransferResult(C, ball, defect, rhs, max(deficit, 0.0), {"n": n_index, "m": m, "r": float(r), "delta": float(delta)}, wit)


def folner_maps(action: ActionModel, half_width: int) -> np.ndarray:
    """A(y) uniform on {s^j y : |j| <= F} for a single-generator action on exact orbits."""
    n = action.space.n
    (s,) = action.group.base_labels
    A = np.zeros((n, n))
    for y in range(n):
        for j in range(-half_width, half_width + 1):
            word = (s,) * j if j >= 0 else (s + "^-1",) * (-j)
            A[y, action.snapped(word)[0][y]] += 1.0 / (2 * half_width + 1)
    return A


def point_mass_maps(n: int) -> np.ndarray:
    return np.eye(n)


def write_transfer_csv(results: Sequence[TransferResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "m", "r", "delta", "defect", "mass_deficit_max"])
        for res in results:
            n, m, r, delta, defect, deficit = res.row()
            w.writerow([n, m, repr(r), repr(delta), repr(defect), repr(deficit)])
