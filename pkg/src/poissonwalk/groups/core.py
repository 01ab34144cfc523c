"""Family-generic operations on group elements."""
from __future__ import annotations

import math
from typing import Union

from ..errors import FamilyMismatchError, IncompatibleActionError
from .affine import AffineElement, SolElement
from .free import FreeWord
from .lamplighter import LampElement, from_dl, to_dl
from .trees import DLMove, DLVertex

GroupElement = Union[FreeWord, LampElement, AffineElement, SolElement, DLMove, DLVertex]


def family_of(g) -> tuple:
    try:
        return g.family
    except AttributeError:
        raise TypeError(f"{type(g).__name__} is not a group element") from None


def identity_like(g):
    """Identity of the family of ``g`` (the base vertex for DL walks)."""
    if isinstance(g, FreeWord):
        return FreeWord(g.rank)
    if isinstance(g, LampElement):
        return LampElement(g.p)
    if isinstance(g, AffineElement):
        return AffineElement()
    if isinstance(g, SolElement):
        return SolElement(g.p, g.q)
    if isinstance(g, (DLMove, DLVertex)):
        return DLVertex.base(g.p, g.q)
    raise TypeError(f"unknown element type {type(g).__name__}")


def compose(g, h):
    """Group product ``g h``; for DL walks, vertex times move."""
    if isinstance(g, DLVertex) and isinstance(h, DLMove):
        return h.apply(g)
    if isinstance(g, DLMove):
        raise FamilyMismatchError("DL moves act on vertices; they are not composed with each other")
    if family_of(g) != family_of(h):
        raise FamilyMismatchError(f"cannot compose {family_of(g)} with {family_of(h)}")
    return g * h


def inverse(g):
    if isinstance(g, (DLMove, DLVertex)):
        raise TypeError("vertex-level DL walks carry no group inverse")
    return g.inverse()


def act(g, x):
    """Apply ``g`` to a point of its model space.

    Free words act on the Cayley tree (vertices are words), lamplighter
    elements on DL_{p,p} vertices, Aff(R) on the real line or on the upper
    half plane (complex points), Sol on itself.
    """
    if isinstance(g, FreeWord):
        if isinstance(x, FreeWord) and x.rank == g.rank:
            return g * x
    elif isinstance(g, LampElement):
        if isinstance(x, DLVertex) and x.p == x.q == g.p:
            return to_dl(g * from_dl(x))
    elif isinstance(g, AffineElement):
        return g(x)
    elif isinstance(g, SolElement):
        if isinstance(x, SolElement):
            return g * x
    raise IncompatibleActionError(f"{type(g).__name__} does not act on {type(x).__name__}")


def height(g) -> float:
    """Busemann height of ``g.o`` in the first horocyclic factor.

    Lamplighter: lamplighter position. DL: left height. Sol: ``c``.
    Aff(R): ``log a``.
    """
    if isinstance(g, LampElement):
        return g.shift
    if isinstance(g, DLMove):
        return g.step
    if isinstance(g, DLVertex):
        return g.height
    if isinstance(g, SolElement):
        return g.c
    if isinstance(g, AffineElement):
        return g.log_a
    raise TypeError(f"no height function for {type(g).__name__}")


def orbit_norm(g) -> float:
    """Distance from the base point to ``g.o`` in the family's model space.

    Free groups: reduced length. Lamplighter: word length for
    ``{t^±1, delta^±1}``. DL: graph distance from the base vertex. Aff(R):
    hyperbolic distance of ``g.i`` from ``i``. Sol: the horocyclic-product
    distance built from the two hyperbolic factors, ``d1 + d2 - |c|``.
    """
    from .lamplighter import word_length
    from .trees import dl_distance
    from .affine import hyperbolic_distance

    if isinstance(g, FreeWord):
        return g.length
    if isinstance(g, LampElement):
        return word_length(g)
    if isinstance(g, DLVertex):
        return dl_distance(DLVertex.base(g.p, g.q), g)
    if isinstance(g, AffineElement):
        return hyperbolic_distance(1j, g(1j))
    if isinstance(g, SolElement):
        d1 = hyperbolic_distance(1j, complex(g.a, math.exp(g.p * g.c))) / g.p
        d2 = hyperbolic_distance(1j, complex(g.b, math.exp(-g.q * g.c))) / g.q
        return max(d1 + d2 - abs(g.c), 0.0)
    raise TypeError(f"no orbit norm for {type(g).__name__}")
