"""The lamplighter group Z_p wr Z and its Diestel-Leader picture.

An element is ``(lamps, shift)`` with ``lamps`` a finitely supported map
Z -> Z_p. Multiplication is ``(f, x)(g, y) = (f + T_x g, x + y)`` with
``(T_x g)(i) = g(i - x)``: right multiplication by ``(delta_0, 0)`` toggles
the lamp under the lamplighter, by ``(0, 1)`` moves him.

``DL_{p,p}`` is the Cayley graph for the switch-walk generators
``(a*delta_0, +1)`` and ``(a*delta_{-1}, -1)``. The vertex of ``(f, x)`` has
left coordinate at height ``x`` with digits ``f(t-1)`` (t <= x) and right
coordinate at height ``-x`` with digits ``f(-s)`` (s <= -x).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from ..errors import FamilyMismatchError
from .trees import DLVertex, TreeVertex


def _clean(p: int, lamps) -> tuple[tuple[int, int], ...]:
    items = lamps.items() if isinstance(lamps, Mapping) else lamps
    acc: dict[int, int] = {}
    for pos, val in items:
        acc[int(pos)] = (acc.get(int(pos), 0) + int(val)) % p
    return tuple(sorted((k, v) for k, v in acc.items() if v))


@dataclass(frozen=True)
class LampElement:
    p: int
    lamps: tuple[tuple[int, int], ...] = ()
    shift: int = 0

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("lamp group order p must be >= 2")
        object.__setattr__(self, "lamps", _clean(self.p, self.lamps))
        object.__setattr__(self, "shift", int(self.shift))

    @classmethod
    def identity(cls, p: int) -> "LampElement":
        return cls(p)

    @classmethod
    def move(cls, p: int, step: int = 1) -> "LampElement":
        return cls(p, (), step)

    @classmethod
    def toggle(cls, p: int, value: int = 1) -> "LampElement":
        return cls(p, ((0, value),), 0)

    @classmethod
    def switch_walk(cls, p: int, value: int, step: int) -> "LampElement":
        """Generator ``(value*delta_0, +1)`` or ``(value*delta_{-1}, -1)``."""
        pos = 0 if step > 0 else -1
        return cls(p, ((pos, value),), step)

    @property
    def family(self) -> tuple:
        return ("lamplighter", self.p)

    def lamp(self, i: int) -> int:
        for pos, val in self.lamps:
            if pos == i:
                return val
        return 0

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(pos for pos, _ in self.lamps)

    def __mul__(self, other: "LampElement") -> "LampElement":
        if not isinstance(other, LampElement) or other.p != self.p:
            raise FamilyMismatchError(f"cannot multiply {self.family} by {getattr(other, 'family', type(other))}")
        x = self.shift
        merged = dict(self.lamps)
        for pos, val in other.lamps:
            merged[pos + x] = (merged.get(pos + x, 0) + val) % self.p
        return LampElement(self.p, merged, x + other.shift)

    def inverse(self) -> "LampElement":
        x = self.shift
        return LampElement(self.p, tuple((pos - x, -val) for pos, val in self.lamps), -x)

    def __str__(self) -> str:
        lit = ",".join(f"{pos}:{val}" for pos, val in self.lamps)
        return f"<{lit or '0'} | {self.shift}>"

    def to_json(self) -> dict:
        return {"family": "lamplighter", "p": self.p, "lamps": [list(kv) for kv in self.lamps],
                "shift": self.shift}


def word_length(g: LampElement) -> int:
    """Word length for the generators ``{t, t^-1, delta, delta^-1}``.

    Each lamp of value ``v`` costs ``min(v, p - v)`` switches; the lamplighter
    must visit the whole interval spanned by 0, the lit lamps and the final
    position, going first to the nearer or the farther end.
    """
    switches = sum(min(v, g.p - v) for _, v in g.lamps)
    pts = list(g.support) + [0, g.shift]
    lo, hi, x = min(pts), max(pts), g.shift
    travel = min(-lo + (hi - lo) + (hi - x), hi + (hi - lo) + (x - lo))
    return switches + travel


def to_dl(g: LampElement) -> DLVertex:
    """The DL_{p,p} vertex ``g.o``."""
    x = g.shift
    lamps = dict(g.lamps)
    lo = min([0, x] + [pos for pos in lamps if pos < x])
    left = tuple(lamps.get(t - 1, 0) for t in range(lo + 1, x + 1))
    hi = max([x] + [pos for pos in lamps if pos >= x])
    # right digit at height s <= -x is f(-s); s runs from min(-hi, 0) - 1 ... -x
    s_lo = min(-hi - 1, 0)
    right = tuple(lamps.get(-s, 0) for s in range(s_lo + 1, -x + 1))
    return DLVertex(TreeVertex(g.p, x, left), TreeVertex(g.p, -x, right))


def from_dl(v: DLVertex) -> LampElement:
    if v.p != v.q:
        raise FamilyMismatchError("only DL_{p,p} vertices correspond to lamplighter elements")
    x = v.height
    lamps = {}
    for t in range(v.left.base + 1, x + 1):
        lamps[t - 1] = v.left.digit(t)
    for s in range(v.right.base + 1, -x + 1):
        lamps[-s] = v.right.digit(s)
    return LampElement(v.p, lamps, x)
