"""Vectorised simulation of many paths at once.

Each engine consumes a matrix of support indices (paths x steps) drawn with
the same per-path streams as :func:`simulate_walk`, so row ``i`` of an
ensemble is exactly the path ``simulate_walk(dist, steps, seed, index=i)``.

Observers are called after every step as ``observer(t, state)`` and may read
but must not modify the state arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..rng import path_rng
from .free import FreeWord
from .lamplighter import LampElement
from .walks import StepDistribution, draw_indices


def step_indices(dist: StepDistribution, seed: int, start: int, stop: int, steps: int) -> np.ndarray:
    """Support indices for paths ``start..stop-1``, one row per path."""
    if not dist.is_finite:
        raise ValueError("vectorised engines need a finitely supported step law")
    dtype = np.int16 if len(dist.elements) < 2 ** 15 else np.int32
    out = np.empty((stop - start, steps), dtype=dtype)
    for row, i in enumerate(range(start, stop)):
        out[row] = draw_indices(path_rng(seed, i), dist.cdf, steps)
    return out


# ------------------------------------------------------------- free groups

@dataclass
class FreeState:
    stack: np.ndarray    # paths x depth, letters (+-i) of the reduced word
    length: np.ndarray   # current word lengths
    agree: np.ndarray | None  # common prefix length with the target word, if tracked


class FreeEngine:
    """Reduced-word stacks for walks on F_k with any finite support."""

    def __init__(self, dist: StepDistribution):
        if dist.family[0] != "free":
            raise ValueError(f"FreeEngine needs a free-group walk, got {dist.family}")
        self.rank = dist.family[1]
        width = max(1, max(len(g) for g in dist.elements))
        table = np.zeros((len(dist.elements), width), dtype=np.int8)
        for s, g in enumerate(dist.elements):
            table[s, : len(g)] = g.letters
        self.letters = table
        self.width = width

    def run(self, idx: np.ndarray, target: np.ndarray | None = None,
            target_len: np.ndarray | None = None,
            observer: Callable[[int, FreeState], None] | None = None) -> FreeState:
        n_paths, steps = idx.shape
        depth = steps * self.width + 1
        stack = np.zeros((n_paths, depth), dtype=np.int8)
        length = np.zeros(n_paths, dtype=np.int64)
        rows = np.arange(n_paths)
        agree = None
        if target is not None:
            agree = np.zeros(n_paths, dtype=np.int64)
            tmax = target.shape[1] - 1
        state = FreeState(stack, length, agree)
        for t in range(steps):
            lets = self.letters[idx[:, t]]
            for j in range(self.width):
                x = lets[:, j]
                top = stack[rows, np.maximum(length - 1, 0)]
                active = x != 0
                pop = active & (length > 0) & (top == -x)
                push = active & ~pop
                if agree is not None:
                    pos = np.minimum(length, tmax)
                    grow = push & (agree == length) & (length < target_len) & (target[rows, pos] == x)
                    np.minimum(agree, length - pop, out=agree)
                    agree += grow
                stack[rows[push], length[push]] = x[push]
                length += push
                length -= pop
            if observer is not None:
                observer(t + 1, state)
        return state

    @staticmethod
    def word(state: FreeState, row: int, rank: int) -> FreeWord:
        n = int(state.length[row])
        return FreeWord(rank, state.stack[row, :n].tolist())


# -------------------------------------------------------------- lamplighter

@dataclass
class DigitState:
    """Heights plus left/right digit functions indexed by ``height + offset``.

    For DL walks the arrays are the stored digits; for lamplighter walks they
    are views computed from the lamp configuration when requested.
    """
    height: np.ndarray
    offset: int
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    lamps: np.ndarray | None = None

    def digits(self) -> tuple[np.ndarray, np.ndarray]:
        """``(left, right)`` digit arrays: ``left[:, t+offset]`` is D(t)."""
        if self.lamps is None:
            return self.left, self.right
        f = self.lamps
        left = np.zeros_like(f)
        left[:, 1:] = f[:, :-1]          # left digit at height t is f(t-1)
        right = f[:, ::-1]               # right digit at height s is f(-s)
        return left, right


class LampEngine:
    """Lamp configurations and lamplighter positions for Z_p wr Z walks."""

    def __init__(self, dist: StepDistribution):
        if dist.family[0] != "lamplighter":
            raise ValueError(f"LampEngine needs a lamplighter walk, got {dist.family}")
        self.p = dist.family[1]
        m = max(1, max(len(g.lamps) for g in dist.elements))
        self.pos = np.zeros((len(dist.elements), m), dtype=np.int64)
        self.val = np.zeros((len(dist.elements), m), dtype=np.int8)
        for s, g in enumerate(dist.elements):
            for j, (ps, v) in enumerate(g.lamps):
                self.pos[s, j], self.val[s, j] = ps, v
        self.shift = np.array([g.shift for g in dist.elements], dtype=np.int64)
        self.reach = int(max(np.abs(self.shift).max(), 1))
        self.span = int(np.abs(self.pos).max()) + 1

    def offset_for(self, steps: int) -> int:
        return steps * self.reach + self.span + 1

    def run(self, idx: np.ndarray, observer=None, offset: int | None = None) -> DigitState:
        """``offset`` (default: enough for ``idx``) fixes the height indexing of the arrays."""
        n_paths, steps = idx.shape
        offset = max(offset or 0, self.offset_for(steps))
        width = 2 * offset + 1
        lamps = np.zeros((n_paths, width), dtype=np.int8)
        x = np.zeros(n_paths, dtype=np.int64)
        rows = np.arange(n_paths)
        state = DigitState(x, offset, lamps=lamps)
        p = self.p
        for t in range(steps):
            s = idx[:, t]
            for j in range(self.pos.shape[1]):
                v = self.val[s, j]
                col = x + self.pos[s, j] + offset
                lamps[rows, col] = (lamps[rows, col] + v) % p
            x += self.shift[s]
            if observer is not None:
                observer(t + 1, state)
        return state

    @staticmethod
    def element(state: DigitState, row: int, p: int) -> LampElement:
        f = state.lamps[row]
        nz = np.nonzero(f)[0]
        return LampElement(p, tuple((int(i) - state.offset, int(f[i])) for i in nz), int(state.height[row]))


class DLEngine:
    """Vertex-level walks on DL_{p,q}: heights plus the two digit functions."""

    def __init__(self, dist: StepDistribution):
        if dist.family[0] != "dl":
            raise ValueError(f"DLEngine needs a DL walk, got {dist.family}")
        self.p, self.q = dist.family[1], dist.family[2]
        self.step = np.array([g.step for g in dist.elements], dtype=np.int64)
        self.digit = np.array([g.digit for g in dist.elements], dtype=np.int8)

    span = 1

    def offset_for(self, steps: int) -> int:
        return steps + 2

    def run(self, idx: np.ndarray, observer=None, offset: int | None = None) -> DigitState:
        n_paths, steps = idx.shape
        offset = max(offset or 0, self.offset_for(steps))
        width = 2 * offset + 1
        left = np.zeros((n_paths, width), dtype=np.int8)
        right = np.zeros((n_paths, width), dtype=np.int8)
        h = np.zeros(n_paths, dtype=np.int64)
        rows = np.arange(n_paths)
        state = DigitState(h, offset, left=left, right=right)
        for t in range(steps):
            s = idx[:, t]
            up = self.step[s] == 1
            d = self.digit[s]
            r_up, r_dn = rows[up], rows[~up]
            left[r_up, h[up] + 1 + offset] = d[up]
            right[r_dn, -h[~up] + 1 + offset] = d[~up]
            h += self.step[s]
            if observer is not None:
                observer(t + 1, state)
        return state


def digit_engine(dist: StepDistribution):
    """The engine tracking heights and tree digits for ``dist``'s family."""
    if dist.family[0] == "lamplighter":
        return LampEngine(dist)
    if dist.family[0] == "dl":
        return DLEngine(dist)
    raise ValueError(f"no digit engine for family {dist.family}")


def confluence_heights(a: np.ndarray, ha: np.ndarray, b: np.ndarray, hb: np.ndarray,
                       offset: int) -> np.ndarray:
    """Row-wise confluence heights of tree vertices given as digit arrays.

    Row ``i`` describes vertices at heights ``ha[i]``, ``hb[i]`` with digit
    functions ``a[i, t+offset]``, ``b[i, t+offset]``. Digits below the array
    are zero for both.
    """
    top = np.minimum(ha, hb)
    heights = np.arange(a.shape[1]) - offset
    diff = (a != b) & (heights[None, :] <= top[:, None])
    has = diff.any(axis=1)
    first = np.argmax(diff, axis=1)
    return np.where(has, heights[first] - 1, top)

