"""Gauges (exhaustions by norm level sets), sub-additivity and ball growth."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from .groups.free import FreeWord
from .groups.lamplighter import LampElement, to_dl, word_length
from .groups.trees import DLVertex, bfs_ball, dl_distance, iter_sphere_sizes
from .reports import csv_text
from .rng import stream_rng

DEFAULT_BALL_BUDGET = 2_000_000
STABLE_REL = 0.10
SLOW_RATE = 0.05


@dataclass(frozen=True)
class Gauge:
    """``|g| = min{n : g in G_n}`` given directly by a norm function.

    ``neighbors`` (if set) lists the elements one step away for ball
    enumeration; ``volume`` (if set) is a closed form for ball sizes.
    """
    name: str
    kind: str
    family: tuple
    norm: Callable[[Any], int]
    identity: Any
    subadditive: bool = True
    neighbors: Callable[[Any], Iterable] | None = None
    volume: Callable[[int], int] | None = None
    translate: Callable[[Any, Any], Any] | None = None


def free_word_gauge(k: int) -> Gauge:
    gens = [FreeWord.generator(k, s * i) for i in range(1, k + 1) for s in (1, -1)]

    def volume(n: int) -> int:
        if n < 0:
            return 0
        if k == 1:
            return 2 * n + 1
        # 1 + sum_{r=1}^n 2k (2k-1)^(r-1)
        return 1 + k * ((2 * k - 1) ** n - 1) // (k - 1)

    return Gauge(f"word-F{k}", "word-metric", ("free", k), len, FreeWord(k),
                 neighbors=lambda w: [w * g for g in gens], volume=volume,
                 translate=lambda g, x: g * x)


def integer_gauge() -> Gauge:
    return free_word_gauge(1)


def lamplighter_word_gauge(p: int) -> Gauge:
    """Word metric for ``{t, t^-1, delta, delta^-1}``, in closed form."""
    gens = [LampElement.move(p, 1), LampElement.move(p, -1), LampElement.toggle(p, 1),
            LampElement.toggle(p, p - 1)]
    return Gauge(f"word-L{p}", "word-metric", ("lamplighter", p), word_length, LampElement(p),
                 neighbors=lambda g: [g * s for s in gens], translate=lambda g, x: g * x)


def lamplighter_orbit_gauge(p: int) -> Gauge:
    """``|g| = d(o, g.o)`` for the action of Z_p wr Z on DL_{p,p}."""
    base = DLVertex.base(p, p)
    gens = [LampElement.switch_walk(p, a, s) for a in range(p) for s in (1, -1)]
    return Gauge(f"orbit-DL{p}", "orbit-metric", ("lamplighter", p),
                 lambda g: dl_distance(base, to_dl(g)), LampElement(p),
                 neighbors=lambda g: [g * s for s in gens], translate=lambda g, x: g * x)


def dl_vertex_gauge(p: int, q: int) -> Gauge:
    """Graph distance from the base vertex of DL_{p,q} (vertex-level walks)."""
    base = DLVertex.base(p, q)
    return Gauge(f"orbit-DL{p},{q}", "orbit-metric", ("dl", p, q), lambda v: dl_distance(base, v), base,
                 neighbors=lambda v: v.neighbors())


def gauge_norm(gauge: Gauge, g) -> int:
    return gauge.norm(g)


# ------------------------------------------------------------ sub-additivity

@dataclass
class SubadditivityReport:
    pairs: int
    violations: int
    worst_excess: float
    examples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {"pairs": self.pairs, "violations": self.violations, "worst_excess": self.worst_excess,
                "examples": [[str(g), str(h)] for g, h in self.examples]}


def check_subadditive(gauge: Gauge, pairs: Iterable[tuple[Any, Any]]) -> SubadditivityReport:
    """Count pairs with ``|gh| > |g| + |h|``."""
    n = bad = 0
    worst = 0.0
    examples = []
    for g, h in pairs:
        n += 1
        excess = gauge.norm(g * h) - gauge.norm(g) - gauge.norm(h)
        if excess > 0:
            bad += 1
            worst = max(worst, excess)
            if len(examples) < 5:
                examples.append((g, h))
    return SubadditivityReport(n, bad, worst, examples)


def random_elements(gauge: Gauge, count: int, seed: int, max_steps: int = 12) -> list:
    """Elements reached by random words of random length (via ``neighbors``)."""
    if gauge.neighbors is None:
        raise ValueError(f"gauge {gauge.name} cannot generate random elements")
    rng = stream_rng(seed, "gauge-sample")
    out = []
    for _ in range(count):
        g = gauge.identity
        for _ in range(int(rng.integers(0, max_steps + 1))):
            nb = list(gauge.neighbors(g))
            g = nb[int(rng.integers(len(nb)))]
        out.append(g)
    return out


def random_pairs(gauge: Gauge, count: int, seed: int, max_steps: int = 12) -> list:
    xs = random_elements(gauge, 2 * count, seed, max_steps)
    return list(zip(xs[0::2], xs[1::2]))


def ball_pairs(gauge: Gauge, radius: int, count: int, seed: int) -> list:
    """Random pairs of elements of the explicitly enumerated ball."""
    ball = list(bfs_ball(gauge.identity, radius, gauge.neighbors))
    rng = stream_rng(seed, "ball-pairs")
    i = rng.integers(len(ball), size=count)
    j = rng.integers(len(ball), size=count)
    return [(ball[a], ball[b]) for a, b in zip(i.tolist(), j.tolist())]


# ------------------------------------------------------------------- balls

def ball_volume(gauge: Gauge, radius: int, method: str = "auto",
                budget: int = DEFAULT_BALL_BUDGET, center=None) -> int:
    """Number of elements with norm at most ``radius`` (around ``center`` if given)."""
    if radius < 0:
        return 0
    if method not in ("auto", "formula", "enumerate"):
        raise ValueError(f"unknown method {method!r}")
    if method != "enumerate" and gauge.volume is not None:
        return gauge.volume(radius)
    if method == "formula":
        raise ValueError(f"gauge {gauge.name} has no closed-form volume")
    if gauge.neighbors is None:
        raise ValueError(f"gauge {gauge.name} cannot enumerate balls")
    start = gauge.identity if center is None else center
    return len(bfs_ball(start, radius, gauge.neighbors, budget))


def sphere_sizes(gauge: Gauge, radius: int, budget: int = DEFAULT_BALL_BUDGET, center=None) -> list[int]:
    start = gauge.identity if center is None else center
    return [c for _, c in iter_sphere_sizes(bfs_ball(start, radius, gauge.neighbors, budget))]


def ball_volumes(gauge: Gauge, max_radius: int, method: str = "auto",
                 budget: int = DEFAULT_BALL_BUDGET, center=None) -> list[int]:
    if method != "enumerate" and gauge.volume is not None and center is None:
        return [gauge.volume(r) for r in range(max_radius + 1)]
    sizes = sphere_sizes(gauge, max_radius, budget, center)
    sizes += [0] * (max_radius + 1 - len(sizes))
    return np.cumsum(sizes).tolist()


@dataclass
class GrowthReport:
    radii: list
    log_volumes: list
    rate: float
    increments: list
    temperate: bool
    fit_from: int
    envelope: float
    stable_under_doubling: bool | None = None
    half_range_rate: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"radii": self.radii, "log_volumes": self.log_volumes, "rate": self.rate,
                "incremental_slopes": self.increments, "temperate": self.temperate,
                "fit_from": self.fit_from, "envelope_constant": self.envelope,
                "stable_under_doubling": self.stable_under_doubling,
                "half_range_rate": self.half_range_rate, **self.extra}

    def to_csv(self) -> str:
        return csv_text(["radius", "count"], ((r, round(math.exp(v))) for r, v in zip(self.radii, self.log_volumes)))


def _fit_rate(radii: np.ndarray, logv: np.ndarray) -> float:
    if radii.size < 2:
        return 0.0
    return float(np.polyfit(radii, logv, 1)[0])


def growth_report(volumes: list[int], rel: float = STABLE_REL, floor: float = SLOW_RATE) -> GrowthReport:
    """Growth summary of ball sizes ``volumes[r]``, r = 0..R.

    The rate is the least-squares slope of log-volume over the upper half of
    the radii (small balls carry boundary effects, e.g. ``log(2*3^r - 1)``).
    The verdict is temperate when the last three incremental slopes agree to
    within ``rel`` or all lie below ``floor``.
    """
    R = len(volumes) - 1
    radii = np.arange(R + 1)
    logv = np.log(np.asarray(volumes, dtype=float))
    start = R // 2
    rate = _fit_rate(radii[start:], logv[start:])
    inc = np.diff(logv)
    last = inc[-3:] if inc.size >= 3 else inc
    if last.size == 0:
        temperate = True
    else:
        hi, lo = float(last.max()), float(last.min())
        temperate = bool(np.isfinite(hi) and (hi < floor or hi - lo <= rel * hi))
    envelope = float(np.max(np.asarray(volumes, float) * np.exp(-rate * radii))) if R >= 0 else 1.0
    return GrowthReport(radii.tolist(), logv.tolist(), rate, inc.tolist(), temperate, start, envelope)


def temperance_estimate(gauge: Gauge, max_radius: int, method: str = "auto",
                        budget: int = DEFAULT_BALL_BUDGET, center=None) -> GrowthReport:
    """Growth report for radii 0..max_radius, with a radius-doubling stability check."""
    vols = ball_volumes(gauge, max_radius, method, budget, center)
    rep = growth_report(vols)
    half = growth_report(vols[: max_radius // 2 + 1]).rate if max_radius >= 4 else rep.rate
    rep.half_range_rate = half
    both_slow = rep.rate < SLOW_RATE and half < SLOW_RATE
    rep.stable_under_doubling = bool(both_slow or abs(rep.rate - half) <= STABLE_REL * abs(rep.rate))
    return rep


def enumerate_norms(gauge: Gauge, radius: int, budget: int = DEFAULT_BALL_BUDGET) -> dict:
    """BFS ball ``{element: graph distance}``; a reference for closed-form norms."""
    if gauge.neighbors is None:
        raise ValueError(f"gauge {gauge.name} cannot enumerate balls")
    return bfs_ball(gauge.identity, radius, gauge.neighbors, budget)
