"""Finite nets of compact metric spaces and the cone / one-point constructions.

A :class:`FiniteSpace` stores point payloads as rows of a float array
``coords`` together with a vectorised ``metric`` that works on arbitrary
payload arrays (not only net points), so that group actions can map a net
point off the net and snap it back.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

KINDS = ("torus", "sphere3", "profinite", "compact_cone", "one_point_ext")

# Float noise floor: payload distances below this count as exact coincidence.
EXACT_TOL = 1e-12

Metric = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProfiniteSpec:
    """Truncated tower of cyclic quotients Z/|G_1| <- Z/|G_2| <- ...

    ``decay_weights[j-1]`` is the distance between sequences that first differ
    at level ``j``.  Beyond the stored weights the sequence is continued
    geometrically with ``ratio``.
    """

    quotient_sizes: tuple[int, ...]
    truncation_level: int
    decay_weights: tuple[float, ...]
    ratio: float = 0.5

    def __post_init__(self):
        sizes = self.quotient_sizes
        if self.truncation_level < 1 or self.truncation_level > len(sizes):
            raise ValueError("truncation_level must be in 1..len(quotient_sizes)")
        if any(s < 1 for s in sizes):
            raise ValueError("quotient sizes must be positive")
        for a, b in zip(sizes, sizes[1:]):
            if b % a:
                raise ValueError(f"quotient sizes must form a divisibility chain: {a} does not divide {b}")
        if not 0 < self.ratio < 1:
            raise ValueError("decay ratio must lie in (0, 1)")
        w = self.decay_weights
        if len(w) < self.truncation_level:
            raise ValueError("need a decay weight for every level up to the truncation")
        if any(a <= 0 for a in w):
            raise ValueError("decay weights must be positive")
        for a, b in zip(w, w[1:]):
            if b > self.ratio * a * (1 + 1e-12):
                raise ValueError(f"decay weights are not geometric with ratio {self.ratio}: {a} -> {b}")

    @classmethod
    def dyadic(cls, depth: int, ratio: float = 0.5, first: Optional[float] = None) -> "ProfiniteSpec":
        """The tower Z/2 <- Z/4 <- ... <- Z/2^depth with a_j = first * ratio^(j-1)."""
        first = ratio if first is None else first
        return cls(
            quotient_sizes=tuple(2**j for j in range(1, depth + 1)),
            truncation_level=depth,
            decay_weights=tuple(first * ratio**j for j in range(depth)),
            ratio=ratio,
        )

    def weight(self, j: int) -> float:
        """a_j for j >= 1, continued geometrically past the stored weights."""
        w = self.decay_weights
        if j <= len(w):
            return w[j - 1]
        return w[-1] * self.ratio ** (j - len(w))

    def digits(self, x: int) -> tuple[int, ...]:
        return tuple(x % s for s in self.quotient_sizes[: self.truncation_level])


@dataclass(frozen=True)
class ConeParams:
    theta: float
    scale: float
    diameter: float

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if self.scale <= 0 or self.diameter <= 0:
            raise ValueError("scale and diameter must be positive")


@dataclass(frozen=True, eq=False)
class FiniteSpace:
    kind: str
    coords: np.ndarray
    metric: Metric = field(repr=False)
    weights: np.ndarray
    mesh: float
    meta: dict = field(default_factory=dict, repr=False)
    base: Optional["FiniteSpace"] = field(default=None, repr=False)
    special: Optional[int] = None  # index of the apex or the added star point

    def __post_init__(self):
        self.coords.setflags(write=False)
        self.weights.setflags(write=False)
        d = self.metric(self.coords, self.coords)
        d[np.diag_indices_from(d)] = 0.0
        d = np.minimum(d, d.T)
        d.setflags(write=False)
        object.__setattr__(self, "dmat", d)

    def __len__(self):
        return len(self.coords)

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def diameter(self) -> float:
        return float(self.dmat.max()) if self.n > 1 else 0.0

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def dist(self, i: int, j: int) -> float:
        return float(self.dmat[i, j])

    def distances_to(self, payloads: np.ndarray) -> np.ndarray:
        """Distances from each payload row to every net point, shape (m, n)."""
        return self.metric(np.atleast_2d(payloads), self.coords)

    def snap(self, payloads: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest net point per payload (lowest index on ties) and the snap error."""
        payloads = np.atleast_2d(payloads)
        if self.kind == "compact_cone":
            return _cone_snap(self, payloads)
        d = self.distances_to(payloads)
        idx = np.argmin(d, axis=1)
        err = d[np.arange(len(idx)), idx]
        err = np.where(err < EXACT_TOL, 0.0, err)
        return idx, err

    def check_metric(self, sample: Optional[int] = None, seed: int = 0, tol: float = 1e-12) -> float:
        """Largest triangle-inequality violation; exhaustive up to 200 points."""
        d = self.dmat
        if abs(d - d.T).max() > 0 or (d < 0).any() or np.diag(d).any():
            raise AssertionError("metric is not symmetric, nonnegative with zero diagonal")
        n = self.n
        if sample is None and n <= 200:
            worst = 0.0
            for k in range(n):
                worst = max(worst, float((d - (d[:, [k]] + d[[k], :])).max()))
            return worst
        rng = np.random.default_rng(seed)
        i, j, k = rng.integers(0, n, size=(3, sample or 100_000))
        return float(max(0.0, (d[i, j] - d[i, k] - d[k, j]).max()))


# metrics ------------------------------------------------------------------


def torus_metric(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Flat l1 metric on [0,1)^d with coordinatewise wraparound."""
    diff = np.abs(a[:, None, :] - b[None, :, :]) % 1.0
    return np.minimum(diff, 1.0 - diff).sum(axis=-1)


def sphere3_metric(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Great-circle distance between unit quaternions."""
    return np.arccos(np.clip(a @ b.T, -1.0, 1.0))


def profinite_metric(spec: ProfiniteSpec) -> Metric:
    a_vals = np.array([spec.weight(j) for j in range(1, spec.truncation_level + 1)])

    def metric(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        neq = a[:, None, :] != b[None, :, :]
        first = np.argmax(neq, axis=-1)
        return np.where(neq.any(axis=-1), a_vals[first], 0.0)

    return metric


def cone_metric_fn(base: FiniteSpace, diameter: float) -> Metric:
    def metric(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        ta, tb = a[:, 0], b[:, 0]
        radial = np.abs(ta[:, None] - tb[None, :]) * diameter
        lower = np.minimum(ta[:, None], tb[None, :])
        return radial + lower * base.metric(a[:, 1:], b[:, 1:])

    return metric


def star_metric_fn(base: FiniteSpace, star_distance: float) -> Metric:
    def metric(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        sa, sb = a[:, -1] > 0.5, b[:, -1] > 0.5
        d = base.metric(a[:, :-1], b[:, :-1])
        d = np.where(sa[:, None] | sb[None, :], star_distance, d)
        return np.where(sa[:, None] & sb[None, :], 0.0, d)

    return metric


# constructions -------------------------------------------------------------


def _uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def torus_grid(resolution: int, dim: int = 1) -> FiniteSpace:
    ticks = np.arange(resolution) / resolution
    coords = np.array(np.meshgrid(*([ticks] * dim), indexing="ij")).reshape(dim, -1).T.copy()
    mesh = dim / (2 * resolution)
    return FiniteSpace(
        "torus", coords, torus_metric, _uniform(len(coords)), mesh, meta={"dim": dim, "resolution": resolution}
    )


def random_unit_quaternions(rng: np.random.Generator, n: int) -> np.ndarray:
    q = rng.standard_normal((n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def _covering_radius(net: np.ndarray, sample: np.ndarray, metric: Metric, chunk: int = 4096) -> float:
    worst = 0.0
    for k in range(0, len(sample), chunk):
        worst = max(worst, float(metric(sample[k : k + chunk], net).min(axis=1).max()))
    return worst


def sphere3_net(resolution: int, seed: int, pool_factor: int = 40, certify: int = 100_000) -> FiniteSpace:
    """Seeded random net on S^3 thinned by farthest-point selection from a random pool.

    The recorded mesh is the largest distance from a fresh random sample of
    ``certify`` quaternions (and of the pool) to the net.
    """
    rng = np.random.default_rng(seed)
    pool = random_unit_quaternions(rng, resolution * pool_factor)
    chosen = [0]
    gap = sphere3_metric(pool, pool[:1])[:, 0]
    for _ in range(resolution - 1):
        k = int(np.argmax(gap))
        chosen.append(k)
        gap = np.minimum(gap, sphere3_metric(pool, pool[k : k + 1])[:, 0])
    net = pool[chosen]
    mesh = max(float(gap.max()), _covering_radius(net, random_unit_quaternions(rng, certify), sphere3_metric))
    return FiniteSpace("sphere3", net, sphere3_metric, _uniform(resolution), mesh, meta={"seed": seed})


def profinite_net(spec: ProfiniteSpec) -> FiniteSpace:
    """All points of the truncated tower, lifted to integer representatives 0..|G_n|-1."""
    size = spec.quotient_sizes[spec.truncation_level - 1]
    coords = np.array([spec.digits(x) for x in range(size)], dtype=float)
    # every point of the completion agrees with some net point up to level n
    mesh = spec.weight(spec.truncation_level + 1)
    return FiniteSpace(
        "profinite",
        coords,
        profinite_metric(spec),
        _uniform(size),
        mesh,
        meta={"spec": spec, "representatives": list(range(size))},
    )


def build_net(kind: str, resolution: int, spec: Optional[ProfiniteSpec] = None, seed: int = 0, dim: int = 1) -> FiniteSpace:
    """Discretize one of the model spaces.

    ``resolution`` is points per axis for the torus, the number of points for
    S^3 and the truncation level for profinite towers (when ``spec`` is
    omitted a dyadic tower of that depth is used).
    """
    if kind not in ("torus", "sphere3", "profinite"):
        if kind in KINDS:
            raise ValueError(f"{kind} is built from a base space; use compact_cone() or one_point_extension()")
        raise ValueError(f"unsupported kind {kind!r}")
    if resolution < 2 and kind != "profinite":
        raise ValueError("resolution must be at least 2")
    if resolution < 3 and kind == "torus":
        warnings.warn("a net this coarse may not be connected under any generator set", stacklevel=2)
    if kind == "torus":
        return torus_grid(resolution, dim)
    if kind == "sphere3":
        return sphere3_net(resolution, seed)
    if spec is None:
        spec = ProfiniteSpec.dyadic(resolution)
    return profinite_net(spec)


def restrict(space: FiniteSpace, indices: Sequence[int]) -> FiniteSpace:
    """Sub-net on the given points; weights are renormalised to the original mass."""
    idx = np.asarray(indices)
    w = space.weights[idx]
    if w.sum() > 0:
        w = w * (space.total_mass / w.sum())
    return FiniteSpace(space.kind, space.coords[idx].copy(), space.metric, w.copy(), space.mesh, dict(space.meta), space.base)


def check_mesh(space: FiniteSpace, reference: np.ndarray) -> float:
    """Largest distance from a reference sample of the model space to the net."""
    return _covering_radius(space.coords, reference, space.metric)


def cone_metric(p, q, base: FiniteSpace, compact: bool = True, diameter: Optional[float] = None) -> float:
    """l1 cone distance between (radius, base index) pairs."""
    (r1, y1), (r2, y2) = p, q
    if r1 < 0 or r2 < 0:
        raise ValueError("radial coordinates must be nonnegative")
    if compact and (r1 > 1 or r2 > 1):
        raise ValueError("compact cone coordinates must lie in [0, 1]")
    if not compact and (r1 == 0 or r2 == 0):
        raise ValueError("infinite cone coordinates must be positive")
    diam = base.diameter if diameter is None else diameter
    return abs(r1 - r2) * diam + min(r1, r2) * base.dist(y1, y2)


def compact_cone(base: FiniteSpace, slices: int | Sequence[float]) -> FiniteSpace:
    """Net of CY = [0,1] x Y / {0} x Y: a product of theta slices with the base net plus the apex.

    ``slices`` is either a count m (thetas k/m, k=1..m) or an explicit list.
    The apex is point 0; slice theta_k occupies a contiguous block in base order.
    """
    thetas = np.arange(1, slices + 1) / slices if isinstance(slices, int) else np.asarray(slices, dtype=float)
    if (thetas <= 0).any() or (thetas > 1).any():
        raise ValueError("slice parameters must lie in (0, 1]")
    diam = base.diameter
    k = base.coords.shape[1]
    rows = [np.zeros(k + 1)]
    weights = [0.0]
    for t in thetas:
        block = np.hstack([np.full((base.n, 1), t), base.coords])
        rows.extend(block)
        weights.extend(base.weights / len(thetas))
    coords = np.array(rows)
    gaps = np.diff(np.concatenate([[0.0], np.sort(thetas), [1.0]]))
    mesh = float(gaps.max()) * diam / 2 + base.mesh
    return FiniteSpace(
        "compact_cone",
        coords,
        cone_metric_fn(base, diam),
        np.array(weights),
        mesh,
        meta={"thetas": tuple(float(t) for t in thetas), "diameter": diam},
        base=base,
        special=0,
    )


def _cone_snap(space: FiniteSpace, payloads: np.ndarray):
    # product snapping: keep the slice, snap the base coordinate
    thetas = np.asarray(space.meta["thetas"])
    base = space.base
    idx = np.empty(len(payloads), dtype=int)
    err = np.zeros(len(payloads))
    for row, p in enumerate(payloads):
        t = p[0]
        if t <= EXACT_TOL:
            idx[row] = space.special
            continue
        k = int(np.argmin(np.abs(thetas - t)))
        (b,), (e,) = base.snap(p[1:])
        idx[row] = 1 + k * base.n + b
        err[row] = abs(thetas[k] - t) * space.meta["diameter"] + min(thetas[k], t) * e
    err = np.where(err < EXACT_TOL, 0.0, err)
    return idx, err


def slice_indices(cone: FiniteSpace, k: int) -> np.ndarray:
    """Net indices of the k-th theta slice of a compact cone, in base order."""
    n = cone.base.n
    return np.arange(1 + k * n, 1 + (k + 1) * n)


def one_point_extension(base: FiniteSpace, star_distance: float, star_weight: float = 0.0) -> FiniteSpace:
    """Y+ = Y with one extra point at constant distance from every base point (last index)."""
    if star_distance <= 0:
        raise ValueError("star_distance must be positive")
    if star_distance < base.diameter / 2 - 1e-15:
        raise ValueError(
            f"star_distance {star_distance} < diam/2 = {base.diameter / 2} violates the triangle inequality"
        )
    coords = np.vstack([np.hstack([base.coords, np.zeros((base.n, 1))]), np.append(np.zeros(base.coords.shape[1]), 1.0)])
    return FiniteSpace(
        "one_point_ext",
        coords,
        star_metric_fn(base, star_distance),
        np.append(base.weights, star_weight),
        base.mesh,
        meta={"star_distance": star_distance},
        base=base,
        special=base.n,
    )


# serialization --------------------------------------------------------------


def _meta_json(space: FiniteSpace) -> dict:
    meta = {"kind": space.kind, "mesh": space.mesh}
    m = dict(space.meta)
    if "spec" in m:
        s = m.pop("spec")
        m["spec"] = {
            "quotient_sizes": list(s.quotient_sizes),
            "truncation_level": s.truncation_level,
            "decay_weights": list(s.decay_weights),
            "ratio": s.ratio,
        }
    meta.update(m)
    if space.base is not None:
        meta["base"] = _meta_json(space.base)
        meta["base_coords"] = space.base.coords.tolist()
        meta["base_weights"] = space.base.weights.tolist()
    return meta


def save_space_csv(space: FiniteSpace, path) -> None:
    """CSV with a ``# warpcone-space {json}`` header line, then id, c0..ck, weight rows."""
    k = space.coords.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write("# warpcone-space " + json.dumps(_meta_json(space), sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["id", *[f"c{i}" for i in range(k)], "weight"])
        for i, (row, wt) in enumerate(zip(space.coords, space.weights)):
            w.writerow([i, *map(repr, map(float, row)), repr(float(wt))])


def _space_from_meta(meta: dict, coords: np.ndarray, weights: np.ndarray) -> FiniteSpace:
    kind = meta["kind"]
    extra = {k: v for k, v in meta.items() if k not in ("kind", "mesh", "base", "base_coords", "base_weights", "spec")}
    if kind == "torus":
        return FiniteSpace(kind, coords, torus_metric, weights, meta["mesh"], extra)
    if kind == "sphere3":
        return FiniteSpace(kind, coords, sphere3_metric, weights, meta["mesh"], extra)
    if kind == "profinite":
        s = meta["spec"]
        spec = ProfiniteSpec(tuple(s["quotient_sizes"]), s["truncation_level"], tuple(s["decay_weights"]), s["ratio"])
        extra["spec"] = spec
        return FiniteSpace(kind, coords, profinite_metric(spec), weights, meta["mesh"], extra)
    base = _space_from_meta(meta["base"], np.array(meta["base_coords"]), np.array(meta["base_weights"]))
    if kind == "compact_cone":
        extra["thetas"] = tuple(extra["thetas"])
        return FiniteSpace(kind, coords, cone_metric_fn(base, extra["diameter"]), weights, meta["mesh"], extra, base, 0)
    if kind == "one_point_ext":
        return FiniteSpace(kind, coords, star_metric_fn(base, extra["star_distance"]), weights, meta["mesh"], extra, base, base.n)
    raise ValueError(f"unsupported kind {kind!r}")


def load_space_csv(path) -> FiniteSpace:
    with open(path, newline="") as fh:
        header = fh.readline()
        if not header.startswith("# warpcone-space "):
            raise ValueError(f"{path}: missing warpcone-space header")
        meta = json.loads(header[len("# warpcone-space ") :])
        rows = list(csv.reader(fh))[1:]
    coords = np.array([[float(v) for v in r[1:-1]] for r in rows])
    weights = np.array([float(r[-1]) for r in rows])
    return _space_from_meta(meta, coords, weights)


def torus_diameter(dim: int) -> float:
    return dim / 2


def sphere3_diameter() -> float:
    return math.pi
