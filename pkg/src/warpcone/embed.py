"""Explicit embeddings into weighted l^p spaces and distortion measurement."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .spaces import FiniteSpace, ProfiniteSpec


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """One coordinate vector per point; norms are (sum_i w_i |v_i|^p)^(1/p)."""

    vectors: np.ndarray = field(repr=False)
    p: float
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.vectors.ndim != 2 or self.vectors.shape[1] != len(self.weights):
            raise ValueError("vectors and weights have inconsistent dimensions")
        if not np.isfinite(self.vectors).all():
            raise ValueError("non-finite coordinates")

    def __len__(self):
        return len(self.vectors)

    def pairwise(self) -> np.ndarray:
        """Matrix of ||F(x) - F(y)||_p."""
        v, w, p = self.vectors, self.weights, self.p
        out = np.empty((len(v), len(v)))
        for i in range(len(v)):
            out[i] = (np.abs(v - v[i]) ** p @ w) ** (1 / p)
        return out


def kuratowski_embed(space: FiniteSpace, p: float = 2.0, metric: Optional[np.ndarray] = None) -> EmbeddingTable:
    """x -> (d(x, y))_y in L^p(Y, weights).  ``metric`` overrides the space metric (e.g. a warped level)."""
    if space.total_mass <= 0:
        raise ValueError("weights must have positive total mass")
    d = space.dmat if metric is None else np.asarray(metric)
    return EmbeddingTable(d.copy(), p, space.weights.copy())


def kuratowski_upper_bound(space: FiniteSpace, p: float) -> float:
    return space.total_mass ** (1 / p)


def profinite_embed(spec: ProfiniteSpec, points: Optional[Sequence[int]] = None, p: float = 1.0, tail: bool = True) -> EmbeddingTable:
    """f((g_n)) = sum_n 2^(-1/p) a_n delta_{g_n} over the disjoint union of the quotients.

    Points are integer representatives; their digit sequences keep differing
    past the truncation, and with ``tail`` that infinite tail is folded into one
    extra coordinate per point carrying 2^(-1/p) (sum_{n > T} a_n^p)^(1/p).
    """
    for a, b in zip(spec.decay_weights, spec.decay_weights[1:]):
        if b >= a:
            raise ValueError("decay weights must be decreasing")
    T = spec.truncation_level
    sizes = spec.quotient_sizes[:T]
    points = list(range(sizes[-1])) if points is None else list(points)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    dim = int(offsets[-1]) + (len(points) if tail else 0)
    v = np.zeros((len(points), dim))
    scale = 2 ** (-1 / p)
    for row, x in enumerate(points):
        for n, g in enumerate(spec.digits(x)):
            v[row, offsets[n] + g] = scale * spec.weight(n + 1)
        if tail:
            # a_n = a_T * ratio^(n - T) beyond the truncation
            rest = spec.weight(T + 1) ** p / (1 - spec.ratio**p)
            v[row, offsets[-1] + row] = scale * rest ** (1 / p)
    return EmbeddingTable(v, p, np.ones(dim))


def profinite_closed_form(ratio: float, p: float) -> float:
    """||f(g) - f(h)|| / d(g, h) for a_j = a_1 ratio^(j-1) when digits differ from level j on."""
    return (1 - ratio**p) ** (-1 / p)


def koopman_translation_embed(
    elements: Sequence, mul: Callable, base: EmbeddingTable, p: Optional[float] = None, metric: Optional[np.ndarray] = None
) -> EmbeddingTable:
    """iota(g)(h) = c(h g) in L^p(G, Haar; L) for a finite group with uniform Haar weights.

    Rows follow ``elements``; coordinates are blocks indexed by h.  If a metric
    on G is supplied it must be left-invariant.
    """
    elements = list(elements)
    p = base.p if p is None else p
    index = {g: i for i, g in enumerate(elements)}
    m = len(elements)
    if metric is not None:
        for a in elements:
            perm = [index[mul(a, g)] for g in elements]
            if np.abs(metric[np.ix_(perm, perm)] - metric).max() > 1e-12:
                raise ValueError(f"metric is not left-invariant under translation by {a!r}")
    k = base.vectors.shape[1]
    v = np.empty((m, m * k))
    for gi, g in enumerate(elements):
        for hi, h in enumerate(elements):
            v[gi, hi * k : (hi + 1) * k] = base.vectors[index[mul(h, g)]]
    weights = np.tile(base.weights, m) / m
    return EmbeddingTable(v, p, weights)


# distortion -----------------------------------------------------------------


@dataclass(frozen=True)
class DistortionReport:
    expansion_max: float
    contraction_min: float
    distortion: float
    rho_samples: tuple  # (bucket distance, rho_minus, rho_plus)
    duplicates: int = 0

    def row(self):
        return (self.expansion_max, self.contraction_min, self.distortion, self.duplicates)


def distortion(metric: np.ndarray, table: EmbeddingTable, buckets: int = 32) -> DistortionReport:
    """Exact ratio scan over all pairs plus log-bucketed control-function envelopes."""
    metric = np.asarray(metric)
    if metric.shape != (len(table), len(table)):
        raise ValueError("metric and table cover different point sets")
    emb = table.pairwise()
    iu, ju = np.triu_indices(len(metric), 1)
    d, e = metric[iu, ju], emb[iu, ju]
    dup = int((d <= 0).sum())
    d, e = d[d > 0], e[d > 0]
    if len(d) == 0:
        return DistortionReport(1.0, 1.0, 1.0, (), dup)
    ratio = e / d
    hi, lo = float(ratio.max()), float(ratio.min())
    dist = hi / lo if lo > 0 else np.inf
    edges = np.geomspace(d.min(), d.max(), buckets + 1) if d.max() > d.min() else np.array([d.min(), d.max()])
    which = np.clip(np.searchsorted(edges, d, side="right") - 1, 0, len(edges) - 2)
    samples = []
    for b in range(len(edges) - 1):
        sel = which == b
        if sel.any():
            samples.append([float(d[sel].max()), float(e[sel].min()), float(e[sel].max())])
    # rho_minus: running minimum from the right keeps it nondecreasing; rho_plus: running max
    for k in range(len(samples) - 2, -1, -1):
        samples[k][1] = min(samples[k][1], samples[k + 1][1])
    for k in range(1, len(samples)):
        samples[k][2] = max(samples[k][2], samples[k - 1][2])
    return DistortionReport(hi, lo, dist, tuple(map(tuple, samples)), dup)


def write_table_csv(table: EmbeddingTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", *[f"x{i}" for i in range(table.vectors.shape[1])]])
        for i, row in enumerate(table.vectors):
            w.writerow([i, *map(repr, map(float, row))])
