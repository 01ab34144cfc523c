"""Real affine group Aff(R) and the Sol groups S(p, q)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import FamilyMismatchError, IncompatibleActionError

RTOL = 1e-9


@dataclass(frozen=True)
class AffineElement:
    """``x -> a x + b`` with ``a > 0``, stored as ``(log a, b)``."""
    log_a: float = 0.0
    b: float = 0.0

    @classmethod
    def from_ab(cls, a: float, b: float) -> "AffineElement":
        if not a > 0:
            raise ValueError("Aff(R) needs a > 0")
        return cls(math.log(a), float(b))

    @classmethod
    def identity(cls) -> "AffineElement":
        return cls()

    @property
    def a(self) -> float:
        return math.exp(self.log_a)

    @property
    def family(self) -> tuple:
        return ("affine",)

    def __mul__(self, other: "AffineElement") -> "AffineElement":
        if not isinstance(other, AffineElement):
            raise FamilyMismatchError(f"cannot multiply Aff(R) by {getattr(other, 'family', type(other))}")
        return AffineElement(self.log_a + other.log_a, self.a * other.b + self.b)

    def inverse(self) -> "AffineElement":
        return AffineElement(-self.log_a, -self.b / self.a)

    def __call__(self, x):
        """Action on the real line, or on the upper half plane for complex ``x``."""
        if isinstance(x, complex):
            return complex(self.a * x.real + self.b, self.a * x.imag)
        if isinstance(x, (int, float, np.floating, np.integer)):
            return self.a * float(x) + self.b
        raise IncompatibleActionError(f"Aff(R) does not act on {type(x).__name__}")

    def isclose(self, other: "AffineElement", rtol: float = RTOL) -> bool:
        return (math.isclose(self.log_a, other.log_a, rel_tol=rtol, abs_tol=rtol)
                and math.isclose(self.b, other.b, rel_tol=rtol, abs_tol=rtol))

    def to_json(self) -> dict:
        return {"family": "affine", "a": self.a, "b": self.b}


def hyperbolic_distance(z: complex, w: complex) -> float:
    """Distance in the upper half plane model."""
    num = abs(z - w) ** 2
    return math.acosh(1.0 + num / (2.0 * z.imag * w.imag))


@dataclass(frozen=True)
class SolElement:
    """The matrix ``[[e^{pc}, a, 0], [0, 1, 0], [0, b, e^{-qc}]]``.

    Multiplying two such matrices gives
    ``(a1 + e^{p c1} a2, b1 + e^{-q c1} b2, c1 + c2)``.
    """
    p: float
    q: float
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0

    @property
    def family(self) -> tuple:
        return ("sol", self.p, self.q)

    @classmethod
    def identity(cls, p: float, q: float) -> "SolElement":
        return cls(p, q)

    def __mul__(self, other: "SolElement") -> "SolElement":
        if not isinstance(other, SolElement) or (other.p, other.q) != (self.p, self.q):
            raise FamilyMismatchError(f"cannot multiply {self.family} by {getattr(other, 'family', type(other))}")
        return SolElement(self.p, self.q,
                          self.a + math.exp(self.p * self.c) * other.a,
                          self.b + math.exp(-self.q * self.c) * other.b,
                          self.c + other.c)

    def inverse(self) -> "SolElement":
        return SolElement(self.p, self.q,
                          -math.exp(-self.p * self.c) * self.a,
                          -math.exp(self.q * self.c) * self.b,
                          -self.c)

    def matrix(self) -> np.ndarray:
        return np.array([[math.exp(self.p * self.c), self.a, 0.0],
                         [0.0, 1.0, 0.0],
                         [0.0, self.b, math.exp(-self.q * self.c)]])

    @property
    def height(self) -> float:
        """Busemann height in the first hyperbolic factor (the ``c`` coordinate)."""
        return self.c

    def isclose(self, other: "SolElement", rtol: float = RTOL) -> bool:
        return all(math.isclose(x, y, rel_tol=rtol, abs_tol=rtol)
                   for x, y in ((self.a, other.a), (self.b, other.b), (self.c, other.c)))

    def to_json(self) -> dict:
        return {"family": "sol", "p": self.p, "q": self.q, "a": self.a, "b": self.b, "c": self.c}
