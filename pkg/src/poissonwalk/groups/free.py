"""Reduced words in the free group F_k.

Letters are nonzero integers: ``i`` stands for the i-th generator and ``-i``
for its inverse, ``1 <= i <= k``. Words are stored as persistent stacks
(each word points to the word with its last letter removed), so multiplying
by a short word costs O(len) of the *short* word, and walk positions share
structure with their predecessors.
"""
from __future__ import annotations

from typing import Iterable, Iterator

from ..errors import FamilyMismatchError

_ALPHABET = "abcdefghijklmnopqrstuvwxyz"
_SUPERSCRIPT_INV = "⁻¹"


class FreeWord:
    __slots__ = ("rank", "length", "_prev", "_last", "_letters", "_hash")

    def __init__(self, rank: int, letters: Iterable[int] = ()):
        if rank < 1:
            raise ValueError("free group rank must be >= 1")
        self.rank = int(rank)
        self.length = 0
        self._prev = None
        self._last = 0
        self._letters: tuple[int, ...] | None = ()
        self._hash = None
        letters = tuple(int(x) for x in letters)
        if letters:
            w = FreeWord(rank)
            for x in letters:
                w = w._push(x)
            if w.length != len(letters):
                raise ValueError(f"word {letters} is not reduced")
            self.length, self._prev, self._last = w.length, w._prev, w._last
            self._letters = letters

    @classmethod
    def _node(cls, prev: "FreeWord", letter: int) -> "FreeWord":
        w = cls.__new__(cls)
        w.rank = prev.rank
        w.length = prev.length + 1
        w._prev = prev
        w._last = letter
        w._letters = None
        w._hash = None
        return w

    @classmethod
    def identity(cls, rank: int) -> "FreeWord":
        return cls(rank)

    @classmethod
    def from_letters(cls, rank: int, letters: Iterable[int]) -> "FreeWord":
        """Freely reduce ``letters`` (which need not be reduced)."""
        w = cls(rank)
        for x in letters:
            w = w._push(int(x))
        return w

    @classmethod
    def generator(cls, rank: int, i: int) -> "FreeWord":
        return cls(rank, (i,))

    @classmethod
    def power(cls, rank: int, i: int, n: int) -> "FreeWord":
        letter = i if n >= 0 else -i
        return cls(rank, (letter,) * abs(n))

    @classmethod
    def parse(cls, rank: int, text: str) -> "FreeWord":
        """Parse ``"ab"``, ``"aB"`` (capital = inverse), ``"b⁻¹a⁻¹"`` or ``"b^-1"``.

        The empty string and ``"e"`` give the identity.
        """
        s = text.replace(" ", "").replace(_SUPERSCRIPT_INV, "^-1")
        if s in ("", "e", "1"):
            return cls(rank)
        letters = []
        i = 0
        while i < len(s):
            ch = s[i]
            if ch.lower() not in _ALPHABET[:rank]:
                raise ValueError(f"bad generator {ch!r} in {text!r} for rank {rank}")
            gen = _ALPHABET.index(ch.lower()) + 1
            sign = -1 if ch.isupper() else 1
            i += 1
            if s.startswith("^-1", i):
                sign = -sign
                i += 3
            letters.append(sign * gen)
        return cls.from_letters(rank, letters)

    def _push(self, letter: int) -> "FreeWord":
        if letter == 0 or abs(letter) > self.rank:
            raise ValueError(f"letter {letter} out of range for rank {self.rank}")
        if self.length and self._last == -letter:
            return self._prev
        return FreeWord._node(self, letter)

    @property
    def letters(self) -> tuple[int, ...]:
        if self._letters is None:
            out = []
            w = self
            while w.length:
                if w._letters is not None:
                    out.extend(reversed(w._letters))
                    break
                out.append(w._last)
                w = w._prev
            self._letters = tuple(reversed(out))
        return self._letters

    @property
    def last(self) -> int:
        return self._last if self.length else 0

    @property
    def family(self) -> tuple:
        return ("free", self.rank)

    def prefix(self, m: int) -> "FreeWord":
        if m >= self.length:
            return self
        return FreeWord(self.rank, self.letters[:max(m, 0)])

    def common_prefix_length(self, other: "FreeWord") -> int:
        n = 0
        for x, y in zip(self.letters, other.letters):
            if x != y:
                break
            n += 1
        return n

    def __mul__(self, other: "FreeWord") -> "FreeWord":
        if not isinstance(other, FreeWord) or other.rank != self.rank:
            raise FamilyMismatchError(f"cannot multiply {self.family} by {getattr(other, 'family', type(other))}")
        w = self
        for x in other.letters:
            w = w._push(x)
        return w

    def inverse(self) -> "FreeWord":
        return FreeWord(self.rank, tuple(-x for x in reversed(self.letters)))

    def __len__(self) -> int:
        return self.length

    def __iter__(self) -> Iterator[int]:
        return iter(self.letters)

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, FreeWord):
            return NotImplemented
        if self.rank != other.rank or self.length != other.length:
            return False
        a, b = self, other
        while a is not b and a.length:
            if a._last != b._last:
                return False
            a, b = a._prev, b._prev
        return True

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.rank, self.letters))
        return self._hash

    def __str__(self) -> str:
        if not self.length:
            return "e"
        parts = []
        for x in self.letters:
            ch = _ALPHABET[abs(x) - 1]
            parts.append(ch if x > 0 else ch + _SUPERSCRIPT_INV)
        return "".join(parts)

    def __repr__(self) -> str:
        return f"FreeWord({self.rank}, {self.letters})"

    def to_json(self) -> dict:
        return {"family": "free", "k": self.rank, "word": list(self.letters)}
