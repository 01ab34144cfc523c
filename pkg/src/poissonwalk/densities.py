"""Densities on the real line and exact n-step laws of discrete walks.

Grid densities are piecewise constant on cells of equal width. The
convolution of two such densities is piecewise linear with breakpoints on the
grid, so its exact cell averages are the means of neighbouring breakpoint
values; :func:`convolve` returns exactly those, which preserves mass up to
rounding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import ndtr

from .errors import BudgetExceededError, GridOverflowError
from .groups.core import compose, family_of, identity_like
from .groups.lamplighter import LampElement
from .groups.walks import StepDistribution
from .reports import csv_text

CELLS_PER_UNIT = 2 ** 14
MAX_CELLS = 2 ** 23
ZERO_DENSITY = 1e-300
TRIM_REL = 1e-16
DEFAULT_BUDGET = 10 ** 7


@dataclass(frozen=True)
class DensityGrid:
    """Cell averages of a density on ``[lo, lo + cells*width)``."""
    lo: float
    width: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("grid needs a non-empty 1-d value array")
        if np.any(v < 0):
            raise ValueError("density values must be non-negative")
        if not self.width > 0:
            raise ValueError("cell width must be positive")
        object.__setattr__(self, "values", v)

    @property
    def cells(self) -> int:
        return self.values.size

    @property
    def hi(self) -> float:
        return self.lo + self.cells * self.width

    @property
    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.cells) + 0.5) * self.width

    def mass(self) -> float:
        return float(self.values.sum() * self.width)

    def sup(self) -> float:
        return float(self.values.max())

    def shift(self, b: float) -> "DensityGrid":
        return DensityGrid(self.lo + b, self.width, self.values)

    def scale(self, c: float) -> "DensityGrid":
        """Multiply the measure (not the variable) by ``c``."""
        return DensityGrid(self.lo, self.width, self.values * c)

    def restrict(self, mask: np.ndarray) -> "DensityGrid":
        """The measure restricted to the cells where ``mask`` is true."""
        return DensityGrid(self.lo, self.width, np.where(mask, self.values, 0.0))

    def _offset_in(self, other: "DensityGrid") -> int:
        if not math.isclose(self.width, other.width, rel_tol=1e-12):
            raise ValueError("grids have different cell widths")
        k = (other.lo - self.lo) / self.width
        ki = round(k)
        if abs(k - ki) > 1e-6:
            raise ValueError("grids are not aligned")
        return ki

    def __add__(self, other: "DensityGrid") -> "DensityGrid":
        k = self._offset_in(other)
        start = min(0, k)
        stop = max(self.cells, k + other.cells)
        out = np.zeros(stop - start)
        out[-start: -start + self.cells] += self.values
        out[k - start: k - start + other.cells] += other.values
        return DensityGrid(self.lo + start * self.width, self.width, out)

    def trim(self, rel: float = TRIM_REL) -> "DensityGrid":
        """Drop leading/trailing cells below ``rel * sup``."""
        keep = np.nonzero(self.values > rel * self.sup())[0]
        if keep.size == 0:
            return self
        a, b = keep[0], keep[-1] + 1
        return DensityGrid(self.lo + a * self.width, self.width, self.values[a:b])

    def coarsen(self, factor: int) -> "DensityGrid":
        """Average blocks of ``factor`` cells (mass preserving)."""
        if factor <= 1:
            return self
        pad = (-self.cells) % factor
        v = np.concatenate([self.values, np.zeros(pad)]).reshape(-1, factor).mean(axis=1)
        return DensityGrid(self.lo, self.width * factor, v)

    def cdf_at_edges(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.values) * self.width])

    def to_csv(self) -> str:
        return csv_text(["x", "density"], zip(self.centers.tolist(), self.values.tolist()))

    # ---- constructors

    @classmethod
    def from_cdf(cls, cdf: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                 cells_per_unit: int = CELLS_PER_UNIT) -> "DensityGrid":
        cells = max(1, int(round((hi - lo) * cells_per_unit)))
        edges = np.linspace(lo, hi, cells + 1)
        w = (hi - lo) / cells
        return cls(lo, w, np.maximum(np.diff(cdf(edges)), 0.0) / w)

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0, cells_per_unit: int = CELLS_PER_UNIT) -> "DensityGrid":
        cells = max(1, int(round((b - a) * cells_per_unit)))
        return cls(a, (b - a) / cells, np.full(cells, 1.0 / (b - a)))

    @classmethod
    def gaussian(cls, mean: float = 0.0, sd: float = 1.0, half_width: float = 8.0,
                 cells: int | None = None, cells_per_unit: int = CELLS_PER_UNIT) -> "DensityGrid":
        lo, hi = mean - half_width * sd, mean + half_width * sd
        if cells is not None:
            cells_per_unit = cells / (hi - lo)
        return cls.from_cdf(lambda x: ndtr((x - mean) / sd), lo, hi, cells_per_unit)

    @classmethod
    def spike(cls, at: float, width: float) -> "DensityGrid":
        """One-cell approximation of a point mass, aligned with grids of this width."""
        return cls(at - 0.5 * width, width, np.array([1.0 / width]))


def convolve(f: DensityGrid, g: DensityGrid, max_cells: int = MAX_CELLS,
             trim_rel: float = TRIM_REL) -> DensityGrid:
    """Density of ``X + Y`` for independent ``X ~ f``, ``Y ~ g``."""
    if not math.isclose(f.width, g.width, rel_tol=1e-12):
        raise ValueError(f"incompatible cell widths {f.width} and {g.width}")
    cells = f.cells + g.cells
    if cells > max_cells:
        raise GridOverflowError(f"convolution needs {cells} cells, limit is {max_cells}", cells)
    w = f.width
    c = fftconvolve(f.values, g.values) if min(f.cells, g.cells) > 64 else np.convolve(f.values, g.values)
    knots = np.zeros(cells + 1)
    knots[1:cells] = w * c
    vals = np.maximum(0.5 * (knots[:-1] + knots[1:]), 0.0)
    out = DensityGrid(f.lo + g.lo, w, vals)
    return out.trim(trim_rel) if trim_rel > 0 else out


def convolution_powers(f: DensityGrid, n_max: int, **kw) -> list[DensityGrid]:
    """``[f, f*f, ..., f^{*n_max}]``."""
    out = [f]
    for _ in range(n_max - 1):
        out.append(convolve(out[-1], f, **kw))
    return out


def differential_entropy(f: DensityGrid) -> float:
    """``-sum w * rho log rho`` over cells with ``rho >= 1e-300``."""
    v = f.values
    v = v[v >= ZERO_DENSITY]
    return float(-(v * np.log(v)).sum() * f.width) + 0.0  # no -0.0 in reports


def convolution_entropy_sequence(f: DensityGrid, n_max: int, **kw) -> np.ndarray:
    """``H_1, ..., H_{n_max}`` of the convolution powers of ``f``."""
    return np.array([differential_entropy(g) for g in convolution_powers(f, n_max, **kw)])


def entropy_sequence_csv(h: np.ndarray) -> str:
    rows = []
    for i, x in enumerate(h):
        rows.append((i + 1, x, x - h[i - 1] if i else ""))
    return csv_text(["n", "H_n", "H_n - H_n-1"], rows)


def mutual_information_gaussian_walk(n: int, sd: float = 1.0) -> float:
    """``I(x_1, x_n)`` for a Gaussian walk: ``0.5 * log(n / (n - 1))``."""
    if n < 2:
        raise ValueError("need n >= 2")
    return 0.5 * math.log(n / (n - 1))


def mutual_information_first_step(f: DensityGrid, n: int, max_pairs: int = 4_000_000,
                                  powers: list[DensityGrid] | None = None) -> float:
    """``I(x_1, x_n)`` by two-dimensional quadrature over ``(x_1, x_n - x_1)``.

    The joint density of ``(x_1, x_n)`` is ``rho_1(a) rho_{n-1}(b - a)``; the
    integrand is ``log(rho_{n-1}(b - a) / rho_n(b))``. Grids are coarsened so
    that the double sum has at most ``max_pairs`` terms.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    pw = powers if powers is not None else convolution_powers(f, n)
    r1, rm, rn = pw[0], pw[n - 2], pw[n - 1]
    factor = max(1, math.ceil(math.sqrt(r1.cells * rm.cells / max_pairs)))
    r1, rm, rn = r1.coarsen(factor), rm.coarsen(factor), rn.coarsen(factor)
    # a in cell i, b - a in cell k  =>  b sits on breakpoint i + k + 1 of the rho_n grid,
    # counted from rho_n's own lower edge.
    base = round((r1.lo + rm.lo - rn.lo) / r1.width)
    vn = np.concatenate([[0.0], rn.values, [0.0]])
    at_knot = 0.5 * (vn[:-1] + vn[1:])      # value at breakpoint j, j = 0..cells
    i = np.arange(r1.cells)[:, None]
    k = np.arange(rm.cells)[None, :]
    j = np.clip(i + k + 1 + base, 0, at_knot.size - 1)
    joint = r1.values[:, None] * rm.values[None, :]
    ok = joint > 0
    num = np.where(ok, rm.values[None, :], 1.0)
    den = np.where(ok, at_knot[j], 1.0)
    den = np.where(den > 0, den, ZERO_DENSITY)
    return float((joint * np.log(num / den)).sum() * r1.width * r1.width)


@dataclass(frozen=True)
class DerriennicCheck:
    n: int
    mutual_information: float
    entropy_increment: float
    residual: float

    def to_json(self) -> dict:
        return {"n": self.n, "mutual_information": self.mutual_information,
                "entropy_increment": self.entropy_increment, "residual": self.residual}


def derriennic_identity_check(f: DensityGrid, n: int, **kw) -> DerriennicCheck:
    """Compare ``I(x_1, x_n)`` with ``H_n - H_{n-1}``."""
    pw = convolution_powers(f, n)
    inc = differential_entropy(pw[n - 1]) - differential_entropy(pw[n - 2])
    mi = mutual_information_first_step(f, n, powers=pw, **kw)
    return DerriennicCheck(n, mi, inc, abs(mi - inc))


# ------------------------------------------------------------ discrete laws

class SparseDistribution:
    """Finitely supported (sub-)probability measure on a discrete family."""

    def __init__(self, probs: dict, family: tuple, sub: bool = False):
        self._probs = dict(probs)
        self.family = family
        self.sub = sub
        total = math.fsum(self._probs.values())
        if any(p < 0 for p in self._probs.values()):
            raise ValueError("negative probability")
        if not sub and abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")

    @classmethod
    def from_step(cls, dist: StepDistribution) -> "SparseDistribution":
        acc: dict = {}
        for g, p in dist.items():
            acc[g] = acc.get(g, 0.0) + p
        return cls(acc, dist.family)

    @classmethod
    def point(cls, g) -> "SparseDistribution":
        return cls({g: 1.0}, family_of(g))

    def prob(self, g) -> float:
        return self._probs.get(g, 0.0)

    def items(self):
        return self._probs.items()

    def mass(self) -> float:
        return math.fsum(self._probs.values())

    def __len__(self) -> int:
        return len(self._probs)

    def scaled(self, c: float) -> "SparseDistribution":
        return SparseDistribution({g: c * p for g, p in self._probs.items()}, self.family, sub=True)

    def __add__(self, other: "SparseDistribution") -> "SparseDistribution":
        acc = dict(self._probs)
        for g, p in other.items():
            acc[g] = acc.get(g, 0.0) + p
        return SparseDistribution(acc, self.family, sub=True)

    def pushforward(self, func: Callable) -> dict:
        acc: dict = {}
        for g, p in self._probs.items():
            k = func(g)
            acc[k] = acc.get(k, 0.0) + p
        return acc


def sparse_convolve(a: SparseDistribution, b: SparseDistribution,
                    budget: int = DEFAULT_BUDGET) -> SparseDistribution:
    """Law of ``x y`` with ``x ~ a`` and ``y ~ b`` independent (``a`` on the left)."""
    projected = len(a) * len(b)
    if projected > budget:
        raise BudgetExceededError(f"convolution would touch {projected} pairs (budget {budget})", projected)
    acc: dict = {}
    for x, p in a.items():
        for y, q in b.items():
            z = compose(x, y)
            acc[z] = acc.get(z, 0.0) + p * q
    return SparseDistribution(acc, a.family, sub=a.sub or b.sub)


class EncodedLampDistribution:
    """Lamplighter n-step law stored as sorted integer codes.

    A code packs the lamplighter position and the lamp digits inside a fixed
    window; :meth:`prob` encodes its argument and looks it up.
    """

    def __init__(self, p: int, window: int, keys: np.ndarray, probs: np.ndarray):
        self.p = p
        self.window = window
        self.npos = 2 * window + 1
        self.keys = keys
        self.probs = probs
        self.family = ("lamplighter", p)
        self.sub = False

    def encode(self, g: LampElement) -> int | None:
        if abs(g.shift) > self.window:
            return None
        code = 0
        for pos, val in g.lamps:
            if abs(pos) > self.window:
                return None
            code += val * self.p ** (pos + self.window)
        return (g.shift + self.window) + self.npos * code

    def decode(self, key: int) -> LampElement:
        x = key % self.npos - self.window
        code = key // self.npos
        lamps = []
        i = 0
        while code:
            code, d = divmod(code, self.p)
            if d:
                lamps.append((i - self.window, d))
            i += 1
        return LampElement(self.p, tuple(lamps), x)

    def prob(self, g: LampElement) -> float:
        k = self.encode(g)
        if k is None:
            return 0.0
        i = np.searchsorted(self.keys, k)
        return float(self.probs[i]) if i < self.keys.size and self.keys[i] == k else 0.0

    def items(self):
        return ((self.decode(int(k)), float(p)) for k, p in zip(self.keys, self.probs))

    def mass(self) -> float:
        return math.fsum(self.probs.tolist())

    def __len__(self) -> int:
        return int(self.keys.size)


def _lamp_laws(dist: StepDistribution, n: int, budget: int):
    """Yield the encoded laws of ``x_1..x_n`` (None if codes would overflow)."""
    p = dist.family[1]
    reach = max(max(abs(g.shift) for g in dist.elements), 1)
    span = max([abs(pos) for g in dist.elements for pos in g.support] + [0])
    window = n * reach + span
    npos = 2 * window + 1
    if (2 * window + 1) * math.log2(p) + math.log2(npos) > 62:
        return None
    return _lamp_law_iter(dist, n, budget, p, window, npos)


def _lamp_law_iter(dist, n, budget, p, window, npos):
    pw = np.array([p ** i for i in range(2 * window + 1)], dtype=np.int64)
    keys = np.array([window], dtype=np.int64)        # identity: position 0, no lamps
    probs = np.array([1.0])
    for _ in range(n):
        if keys.size * len(dist.elements) > budget:
            raise BudgetExceededError(
                f"n-step law would touch {keys.size * len(dist.elements)} entries (budget {budget})",
                keys.size * len(dist.elements))
        x = keys % npos - window
        code = keys // npos
        new_keys, new_probs = [], []
        for g, q in dist.items():
            c = code.copy()
            for pos, val in g.lamps:
                j = x + pos + window
                d = (c // pw[j]) % p
                c = c + (((d + val) % p) - d) * pw[j]
            new_keys.append((x + g.shift + window) + npos * c)
            new_probs.append(probs * q)
        allk = np.concatenate(new_keys)
        allp = np.concatenate(new_probs)
        keys, inv = np.unique(allk, return_inverse=True)
        probs = np.bincount(inv, weights=allp)
        yield EncodedLampDistribution(p, window, keys, probs)


def nstep_laws(dist: StepDistribution, n: int, budget: int = DEFAULT_BUDGET):
    """Yield the exact laws of ``x_1, ..., x_n`` in turn."""
    if dist.family[0] == "lamplighter":
        fast = _lamp_laws(dist, n, budget)
        if fast is not None:
            yield from fast
            return
    step = SparseDistribution.from_step(dist)
    out = SparseDistribution.point(dist.identity())
    for _ in range(n):
        out = sparse_convolve(out, step, budget)
        yield out


def exact_nstep(dist: StepDistribution | SparseDistribution, n: int, budget: int = DEFAULT_BUDGET):
    """Exact law of ``x_n`` by repeated sparse convolution.

    Raises :class:`BudgetExceededError` (with the projected size) when a
    convolution step would exceed ``budget`` entries.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if isinstance(dist, StepDistribution):
        if n == 0:
            return SparseDistribution.point(dist.identity())
        law = None
        for law in nstep_laws(dist, n, budget):
            pass
        return law
    e = identity_like(next(iter(dist.items()))[0])
    out = SparseDistribution.point(e)
    for _ in range(n):
        out = sparse_convolve(out, dist, budget)
    return out


def enumerate_paths_law(dist: StepDistribution, n: int) -> dict:
    """Law of ``x_n`` by enumerating every sequence of ``n`` increments (tiny cases only)."""
    from itertools import product

    acc: dict = {}
    items = dist.items()
    e = dist.identity()
    for seq in product(items, repeat=n):
        x, p = e, 1.0
        for g, q in seq:
            x = compose(x, g)
            p *= q
        acc[x] = acc.get(x, 0.0) + p
    return acc


def norm_law(law, norm: Callable) -> dict:
    """Push an n-step law forward to the law of ``norm(x_n)``."""
    acc: dict = {}
    for g, p in law.items():
        k = norm(g)
        acc[k] = acc.get(k, 0.0) + p
    return acc

