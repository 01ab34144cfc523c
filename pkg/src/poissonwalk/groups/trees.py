"""Regular trees in horocyclic coordinates and Diestel-Leader graphs.

``T_p`` is the (p+1)-regular tree with a fixed end ``omega``. Every vertex has
one neighbour towards ``omega`` (its *parent*, one level lower) and ``p``
children labelled by digits ``0..p-1`` (one level higher). Heights are the
Busemann function ``h(x) = d(x, c) - d(o, c)``, ``c`` the projection of ``x``
onto the ray ``[o, omega)``, so heights decrease towards ``omega``.

The ray from ``o`` to ``omega`` is the chain of vertices ``r_t`` (t <= 0)
with ``r_{t+1} = child(r_t, 0)``. A vertex is stored as ``(height, digits)``:
it is reached from the ray vertex at height ``height - len(digits)`` by
following ``digits``. Equivalently a vertex ``v`` defines a digit function
``D_v(t)`` for ``t <= height(v)`` (the digit used to arrive at height ``t``),
zero far below. Canonical form strips leading zero digits while the base is
below ``o``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Iterator

from ..errors import BudgetExceededError, FamilyMismatchError


def _canonical(height: int, digits: tuple[int, ...]) -> tuple[int, ...]:
    base = height - len(digits)
    if base > 0:
        digits = (0,) * base + digits
        base = 0
    i = 0
    while i < len(digits) and base < 0 and digits[i] == 0:
        i += 1
        base += 1
    return digits[i:]


@dataclass(frozen=True)
class TreeVertex:
    p: int
    height: int
    digits: tuple[int, ...] = ()

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("tree degree parameter p must be >= 2")
        digits = tuple(int(d) for d in self.digits)
        if any(d < 0 or d >= self.p for d in digits):
            raise ValueError(f"digits must lie in 0..{self.p - 1}")
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "digits", _canonical(self.height, digits))

    @classmethod
    def root(cls, p: int) -> "TreeVertex":
        return cls(p, 0, ())

    @classmethod
    def ray(cls, p: int, t: int) -> "TreeVertex":
        """The vertex at height ``t <= 0`` on the ray from ``o`` towards omega."""
        if t > 0:
            raise ValueError("the ray towards omega only has heights <= 0")
        return cls(p, t, ())

    @property
    def base(self) -> int:
        return self.height - len(self.digits)

    def digit(self, t: int) -> int:
        """Digit used to arrive at height ``t`` (``t <= height``)."""
        if t > self.height:
            raise ValueError("height above the vertex")
        b = self.base
        return 0 if t <= b else self.digits[t - b - 1]

    def parent(self) -> "TreeVertex":
        return TreeVertex(self.p, self.height - 1, self.digits[:-1])

    def child(self, d: int) -> "TreeVertex":
        return TreeVertex(self.p, self.height + 1, self.digits + (d,))

    def neighbors(self) -> list["TreeVertex"]:
        return [self.parent()] + [self.child(d) for d in range(self.p)]

    def ancestor(self, t: int) -> "TreeVertex":
        """The vertex at height ``t <= height`` on the path towards omega."""
        if t > self.height:
            raise ValueError("ancestor height above vertex")
        b = self.base
        if t <= b:
            return TreeVertex(self.p, t, ())
        return TreeVertex(self.p, t, self.digits[: t - b])

    def __str__(self) -> str:
        return f"T{self.p}[h={self.height}; {''.join(map(str, self.digits)) or '-'}]"


def busemann(v: TreeVertex) -> int:
    """Busemann height of ``v`` with respect to the fixed end."""
    return v.height


def confluence_height(u: TreeVertex, v: TreeVertex) -> int:
    """Height of the point where the rays from ``u`` and ``v`` to omega merge."""
    if u.p != v.p:
        raise FamilyMismatchError(f"vertices of T_{u.p} and T_{v.p}")
    top = min(u.height, v.height)
    t = min(u.base, v.base) + 1
    while t <= top:
        if u.digit(t) != v.digit(t):
            return t - 1
        t += 1
    return top


def tree_distance(u: TreeVertex, v: TreeVertex) -> int:
    c = confluence_height(u, v)
    return u.height + v.height - 2 * c


def projection_to_ray(v: TreeVertex) -> TreeVertex:
    """Closest point of the ray ``[o, omega)`` to ``v``."""
    o = TreeVertex.root(v.p)
    return TreeVertex.ray(v.p, min(0, confluence_height(v, o)))


@dataclass(frozen=True)
class DLVertex:
    left: TreeVertex
    right: TreeVertex

    def __post_init__(self):
        if self.left.height + self.right.height != 0:
            raise ValueError("DL vertex needs h1(left) + h2(right) = 0")

    @classmethod
    def base(cls, p: int, q: int) -> "DLVertex":
        return cls(TreeVertex.root(p), TreeVertex.root(q))

    @property
    def p(self) -> int:
        return self.left.p

    @property
    def q(self) -> int:
        return self.right.p

    @property
    def height(self) -> int:
        return self.left.height

    @property
    def family(self) -> tuple:
        return ("dl", self.p, self.q)

    def neighbors(self) -> list["DLVertex"]:
        up = [DLVertex(self.left.child(d), self.right.parent()) for d in range(self.p)]
        down = [DLVertex(self.left.parent(), self.right.child(d)) for d in range(self.q)]
        return up + down

    def __mul__(self, move: "DLMove") -> "DLVertex":
        if not isinstance(move, DLMove):
            raise FamilyMismatchError("DL vertices are moved by DLMove increments")
        return move.apply(self)

    def __str__(self) -> str:
        return f"({self.left}, {self.right})"


def dl_distance(v: DLVertex, w: DLVertex) -> int:
    """Graph distance in DL_{p,q}: d1 + d2 - |h1(w1) - h1(v1)|."""
    if (v.p, v.q) != (w.p, w.q):
        raise FamilyMismatchError("vertices of different Diestel-Leader graphs")
    d1 = tree_distance(v.left, w.left)
    d2 = tree_distance(v.right, w.right)
    return d1 + d2 - abs(w.left.height - v.left.height)


@dataclass(frozen=True)
class DLMove:
    """One vertex-level step in DL_{p,q}.

    ``step=+1`` moves the left coordinate to its child ``digit`` and the right
    coordinate to its parent; ``step=-1`` does the opposite, with ``digit``
    choosing the child in the right tree.
    """
    p: int
    q: int
    step: int
    digit: int

    def __post_init__(self):
        if self.step not in (1, -1):
            raise ValueError("DL move step must be +1 or -1")
        limit = self.p if self.step == 1 else self.q
        if not 0 <= self.digit < limit:
            raise ValueError(f"digit {self.digit} out of range 0..{limit - 1}")

    @property
    def family(self) -> tuple:
        return ("dl", self.p, self.q)

    @property
    def height_increment(self) -> int:
        return self.step

    def apply(self, v: DLVertex) -> DLVertex:
        if (v.p, v.q) != (self.p, self.q):
            raise FamilyMismatchError("move and vertex belong to different DL graphs")
        if self.step == 1:
            return DLVertex(v.left.child(self.digit), v.right.parent())
        return DLVertex(v.left.parent(), v.right.child(self.digit))

    def __str__(self) -> str:
        return f"{'+' if self.step > 0 else '-'}{self.digit}"


def bfs_ball(center: Hashable, radius: int, neighbors: Callable[[Hashable], Iterable[Hashable]],
             budget: int | None = None) -> dict:
    """Breadth-first ball: mapping vertex -> distance from ``center``."""
    dist = {center: 0}
    queue = deque([center])
    while queue:
        x = queue.popleft()
        d = dist[x]
        if d == radius:
            continue
        for y in neighbors(x):
            if y not in dist:
                dist[y] = d + 1
                if budget is not None and len(dist) > budget:
                    raise BudgetExceededError(f"ball enumeration exceeded {budget} vertices", len(dist))
                queue.append(y)
    return dist


def iter_sphere_sizes(dist: dict) -> Iterator[tuple[int, int]]:
    counts: dict[int, int] = {}
    for d in dist.values():
        counts[d] = counts.get(d, 0) + 1
    for r in sorted(counts):
        yield r, counts[r]
