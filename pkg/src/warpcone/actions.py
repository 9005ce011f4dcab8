"""Finitely generated groups with distinguished generators and their actions on nets.

Words are tuples of generator labels applied left to right: the word
``(s1, s2)`` acts as ``x -> s2(s1(x))`` and represents the element ``s2 * s1``.
Inverse labels carry a ``^-1`` suffix.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Optional, Sequence

import numpy as np

from .spaces import EXACT_TOL, FiniteSpace

Element = Hashable
Word = tuple[str, ...]


class BallCapExceeded(RuntimeError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"word ball has at least {count} elements, over the cap of {cap}")
        self.count = count


def inverse_label(label: str) -> str:
    return label[:-3] if label.endswith("^-1") else label + "^-1"


# element arithmetic ---------------------------------------------------------


def _abelian_ops(moduli: tuple[int, ...]):
    def reduce(v):
        return tuple(x % m if m else x for x, m in zip(v, moduli))

    def mul(a, b):
        return reduce(tuple(x + y for x, y in zip(a, b)))

    def inv(a):
        return reduce(tuple(-x for x in a))

    return mul, inv, tuple(0 for _ in moduli)


def _sl2_mul(a, b):
    a1, b1, c1, d1 = a
    a2, b2, c2, d2 = b
    return (a1 * a2 + b1 * c2, a1 * b2 + b1 * d2, c1 * a2 + d1 * c2, c1 * b2 + d1 * d2)


def _sl2_inv(a):
    x, y, z, w = a
    return (w, -y, -z, x)


def _free_mul(a, b):
    out = list(a)
    for letter in b:
        if out and out[-1] == -letter:
            out.pop()
        else:
            out.append(letter)
    return tuple(out)


def _free_inv(a):
    return tuple(-x for x in reversed(a))


def quat_mul(p, q):
    a1, b1, c1, d1 = p
    a2, b2, c2, d2 = q
    return (
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    )


def _quat_reduce(q, k):
    # the element is q / sqrt(norm)^k with norm(q) = base^k
    while k >= 2 and all(x % 5 == 0 for x in q):
        q = tuple(x // 5 for x in q)
        k -= 2
    return (q, k)


def _quat_elem_mul(a, b):
    return _quat_reduce(quat_mul(a[0], b[0]), a[1] + b[1])


def _quat_elem_inv(a):
    q, k = a
    return (q[0], -q[1], -q[2], -q[3]), k


@dataclass(frozen=True, eq=False)
class GroupPresentation:
    """Generators (closed under inverses) with exact element arithmetic.

    ``kind`` is one of ``abelian`` (Z^k x Z/m products given by ``moduli``, 0
    meaning Z), ``sl2z`` (integer matrices (a, b, c, d)), ``free`` (reduced
    words of signed letters) and ``quaternion`` (integer quaternions q with a
    norm exponent k, the element being q / 5^(k/2)).
    """

    kind: str
    labels: tuple[str, ...]
    gens: dict = field(repr=False)
    mul: Callable = field(repr=False)
    inv: Callable = field(repr=False)
    identity: Element = None

    def __post_init__(self):
        for s in self.labels:
            t = inverse_label(s)
            if t not in self.labels:
                raise ValueError(f"generator set is not closed under inverses: {t} missing")
            if self.mul(self.gens[s], self.gens[t]) != self.identity:
                raise ValueError(f"{t} is not inverse to {s}")

    def evaluate(self, word: Word) -> Element:
        g = self.identity
        for s in word:
            g = self.mul(self.gens[s], g)
        return g

    @property
    def base_labels(self) -> tuple[str, ...]:
        return tuple(s for s in self.labels if not s.endswith("^-1"))


def _with_inverses(names, elems, inv):
    gens = {}
    labels = []
    for name, g in zip(names, elems):
        gens[name] = g
        gens[name + "^-1"] = inv(g)
        labels += [name, name + "^-1"]
    return tuple(labels), gens


def abelian_group(moduli: Sequence[int], names: Optional[Sequence[str]] = None) -> GroupPresentation:
    moduli = tuple(moduli)
    names = list(names or [f"s{i}" if len(moduli) > 1 else "s" for i in range(len(moduli))])
    mul, inv, e = _abelian_ops(moduli)
    unit = [tuple(int(i == j) for j in range(len(moduli))) for i in range(len(moduli))]
    labels, gens = _with_inverses(names, unit, inv)
    return GroupPresentation("abelian", labels, gens, mul, inv, e)


def trivial_group() -> GroupPresentation:
    return abelian_group(())


def sl2z_group() -> GroupPresentation:
    labels, gens = _with_inverses(["T", "R"], [(1, 1, 0, 1), (0, -1, 1, 0)], _sl2_inv)
    return GroupPresentation("sl2z", labels, gens, _sl2_mul, _sl2_inv, (1, 0, 0, 1))


def free_group(rank: int) -> GroupPresentation:
    names = [chr(ord("a") + i) for i in range(rank)]
    labels, gens = _with_inverses(names, [(i + 1,) for i in range(rank)], _free_inv)
    return GroupPresentation("free", labels, gens, _free_mul, _free_inv, ())


# rotations by arccos(3/5) about the x and y axes: unit quaternions (2,1,0,0)/sqrt5, (2,0,1,0)/sqrt5
FREE_ROTATION_QUATERNIONS = {"a": (2, 1, 0, 0), "b": (2, 0, 1, 0)}


def free_rotation_group() -> GroupPresentation:
    elems = [(q, 1) for q in FREE_ROTATION_QUATERNIONS.values()]
    labels, gens = _with_inverses(list(FREE_ROTATION_QUATERNIONS), elems, _quat_elem_inv)
    return GroupPresentation("quaternion", labels, gens, _quat_elem_mul, _quat_elem_inv, ((1, 0, 0, 0), 0))


def quaternion_float(elem) -> np.ndarray:
    q, k = elem
    return np.array(q, dtype=float) / 5 ** (k / 2)


# word balls -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WordBall:
    group: GroupPresentation
    radius: int
    elements: tuple
    lengths: tuple[int, ...]
    words: tuple[Word, ...]
    index: dict = field(repr=False)

    def __len__(self):
        return len(self.elements)

    def __contains__(self, g):
        return g in self.index

    def sphere(self, length: int) -> list[int]:
        return [i for i, l in enumerate(self.lengths) if l == length]


def word_ball_data(group: GroupPresentation, radius: int, cap: int = 200_000) -> WordBall:
    """Breadth-first enumeration of B(e, radius) with geodesic words."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    seen = {group.identity: (0, ())}
    frontier = deque([group.identity])
    while frontier:
        g = frontier.popleft()
        length, word = seen[g]
        if length == radius:
            continue
        for s in group.labels:
            h = group.mul(group.gens[s], g)
            if h not in seen:
                seen[h] = (length + 1, word + (s,))
                if len(seen) > cap:
                    raise BallCapExceeded(len(seen), cap)
                frontier.append(h)
    order = sorted(seen, key=lambda g: (seen[g][0], g))
    return WordBall(
        group,
        radius,
        tuple(order),
        tuple(seen[g][0] for g in order),
        tuple(seen[g][1] for g in order),
        {g: i for i, g in enumerate(order)},
    )


def word_ball(group: GroupPresentation, radius: int, cap: int = 200_000) -> list[tuple[Element, int]]:
    ball = word_ball_data(group, radius, cap)
    return list(zip(ball.elements, ball.lengths))


# actions --------------------------------------------------------------------

GeneratorMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ActionModel:
    group: GroupPresentation
    space: FiniteSpace
    generator_map: dict = field(repr=False)
    free_flag: bool = False
    name: str = ""

    def __post_init__(self):
        missing = set(self.group.labels) - set(self.generator_map)
        if missing:
            raise ValueError(f"no generator map for {sorted(missing)}")
        lip = {s: generator_lipschitz(self, s) for s in self.group.labels}
        object.__setattr__(self, "lipschitz", lip)
        snaps = {s: self.space.snap(self.generator_map[s](self.space.coords)) for s in self.group.labels}
        object.__setattr__(self, "_gen_snap", snaps)

    @property
    def max_lipschitz(self) -> float:
        return max(self.lipschitz.values(), default=1.0)

    def image(self, word: Word, payloads: Optional[np.ndarray] = None) -> np.ndarray:
        """Exact image payloads of ``word`` (no snapping)."""
        x = self.space.coords if payloads is None else np.atleast_2d(payloads)
        for s in word:
            x = self.generator_map[s](x)
        return x

    def snapped(self, word: Word) -> tuple[np.ndarray, np.ndarray]:
        """Snapped image index and snap error of every net point under ``word``."""
        if len(word) == 0:
            return np.arange(self.space.n), np.zeros(self.space.n)
        if len(word) == 1:
            return self._gen_snap[word[0]]
        return self.space.snap(self.image(word))

    def generator_targets(self, s: str) -> tuple[np.ndarray, np.ndarray]:
        return self._gen_snap[s]

    def is_exact(self, ball: Optional[WordBall] = None) -> bool:
        """Whether generator images (or images of ``ball`` elements) land on net points."""
        words = ball.words if ball is not None else [(s,) for s in self.group.labels]
        return all(not self.snapped(w)[1].any() for w in words)


def apply_word(action: ActionModel, word: Word, point: int) -> tuple[int, float]:
    """Apply the exact generator maps to a net point payload, then snap once."""
    if not word:
        return point, 0.0
    img = action.image(word, action.space.coords[point])
    (idx,), (err,) = action.space.snap(img)
    return int(idx), float(err)


def snap_error_bound(action: ActionModel, word: Word) -> float:
    """Error budget for a word whose exact image is snapped once: sum of Lipschitz tails times mesh."""
    total = 0.0
    tail = 1.0
    for s in reversed(word):
        total += tail * action.space.mesh
        tail *= action.lipschitz[s]
    return total


def generator_lipschitz(action: ActionModel, s: str) -> float:
    space = action.space
    if space.n < 2:
        raise ValueError("need at least two net points")
    img = action.generator_map[s](space.coords)
    dimg = space.metric(img, img)
    mask = space.dmat > 0
    return float((dimg[mask] / space.dmat[mask]).max())


# concrete actions -------------------------------------------------------------


def _turns(angle) -> float:
    return float(Fraction(angle)) if isinstance(angle, (str, Fraction)) else float(angle)


def rotation_action(space: FiniteSpace, angles: Sequence, moduli: Optional[Sequence[int]] = None, free_flag: Optional[bool] = None) -> ActionModel:
    """Z^k (or a product of cyclic groups) rotating the first torus coordinate by the given turns."""
    if space.kind != "torus":
        raise ValueError("rotations act on torus nets")
    turns = [_turns(a) for a in angles]
    moduli = tuple(moduli) if moduli is not None else tuple(0 for _ in turns)
    group = abelian_group(moduli)
    maps = {}
    for name, t in zip(group.base_labels, turns):
        maps[name] = _shift(t)
        maps[inverse_label(name)] = _shift(-t)
    if free_flag is None:
        free_flag = _rotation_free(angles, moduli)
    return ActionModel(group, space, maps, free_flag, name=f"rotation{tuple(angles)}")


def _shift(t: float) -> GeneratorMap:
    def f(x):
        y = x.copy()
        y[:, 0] = (y[:, 0] + t) % 1.0
        return y

    return f


def _rotation_free(angles, moduli) -> bool:
    if len(angles) != 1:
        return False
    a = angles[0]
    if isinstance(a, (str, Fraction)):
        a = Fraction(a)
        return moduli[0] != 0 and (a * moduli[0]).denominator == 1 and a.denominator == moduli[0]
    return moduli[0] == 0


def antipodal_action(space: FiniteSpace) -> ActionModel:
    return rotation_action(space, ["1/2"], moduli=[2])


def sl2_torus_action(space: FiniteSpace) -> ActionModel:
    """SL2(Z) acting linearly on column vectors of T^2 with generators T=(1 1;0 1), R=(0 -1;1 0)."""
    if space.kind != "torus" or space.coords.shape[1] != 2:
        raise ValueError("SL2(Z) acts on the 2-torus")
    group = sl2z_group()
    maps = {s: _linear(group.gens[s]) for s in group.labels}
    return ActionModel(group, space, maps, False, name="sl2z")


def _linear(m) -> GeneratorMap:
    a, b, c, d = m

    def f(x):
        return np.stack([(a * x[:, 0] + b * x[:, 1]) % 1.0, (c * x[:, 0] + d * x[:, 1]) % 1.0], axis=1)

    return f


def quaternion_action(space: FiniteSpace) -> ActionModel:
    """Free rotation group acting on S^3 by left multiplication."""
    if space.kind != "sphere3":
        raise ValueError("quaternion action needs a sphere3 net")
    group = free_rotation_group()
    maps = {s: _left_mult(quaternion_float(group.gens[s])) for s in group.labels}
    return ActionModel(group, space, maps, True, name="free-rotation")


def _left_mult(q: np.ndarray) -> GeneratorMap:
    a, b, c, d = q
    mat = np.array([[a, -b, -c, -d], [b, a, -d, c], [c, d, a, -b], [d, -c, b, a]])

    def f(x):
        y = x @ mat.T
        return y / np.linalg.norm(y, axis=1, keepdims=True)

    return f


def odometer_action(space: FiniteSpace) -> ActionModel:
    """Z acting on a cyclic profinite tower by adding 1 in every quotient."""
    if space.kind != "profinite":
        raise ValueError("odometer acts on profinite nets")
    spec = space.meta["spec"]
    sizes = np.array(spec.quotient_sizes[: spec.truncation_level], dtype=float)
    group = abelian_group([0])

    def add(k):
        return lambda x: (x + k) % sizes

    return ActionModel(group, space, {"s": add(1), "s^-1": add(-1)}, True, name="odometer")


def trivial_action(space: FiniteSpace) -> ActionModel:
    return ActionModel(trivial_group(), space, {}, True, name="trivial")


def cone_action(action: ActionModel, cone: FiniteSpace) -> ActionModel:
    """Extend an action on Y to CY by acting on the base coordinate; the apex is fixed."""
    if cone.kind != "compact_cone" or cone.base is not action.space:
        raise ValueError("cone must be built over the action's space")

    def lift(f):
        def g(x):
            y = x.copy()
            live = x[:, 0] > EXACT_TOL
            if live.any():
                y[live, 1:] = f(x[live, 1:])
            return y

        return g

    maps = {s: lift(f) for s, f in action.generator_map.items()}
    return ActionModel(action.group, cone, maps, False, name=f"cone({action.name})")


def extension_action(action: ActionModel, ext: FiniteSpace) -> ActionModel:
    """Extend an action on Y to Y+ with the star fixed."""
    if ext.kind != "one_point_ext" or ext.base is not action.space:
        raise ValueError("extension must be built over the action's space")

    def lift(f):
        def g(x):
            y = x.copy()
            live = x[:, -1] < 0.5
            if live.any():
                y[live, :-1] = f(x[live, :-1])
            return y

        return g

    maps = {s: lift(f) for s, f in action.generator_map.items()}
    return ActionModel(action.group, ext, maps, False, name=f"plus({action.name})")


def restrict_action(action: ActionModel, space: FiniteSpace) -> ActionModel:
    """Same generator maps on another net of the same model space (e.g. an invariant sub-net)."""
    return ActionModel(action.group, space, dict(action.generator_map), action.free_flag, name=action.name)
