"""Step distributions, sample paths and walk simulation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from ..errors import DivergenceError, FamilyMismatchError
from ..reports import csv_text, jsonable, mean_stderr
from ..rng import path_rng, stream_rng
from .affine import AffineElement, SolElement
from .core import compose, family_of, height, identity_like, orbit_norm
from .free import FreeWord
from .lamplighter import LampElement
from .trees import DLMove, DLVertex

PROB_TOL = 1e-12


def draw_indices(rng: np.random.Generator, cdf: np.ndarray, n) -> np.ndarray:
    """Inverse-CDF sampling of support indices; shared by every simulator."""
    u = rng.random(n)
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1)


# ---------------------------------------------------------------- parametric

_KNOWN = {
    "normal": ("mean", "sd"),
    "uniform": ("lo", "hi"),
    "cauchy": ("loc", "scale"),
    "constant": ("value",),
    "choice": ("values", "probs"),
}


@dataclass(frozen=True)
class Component:
    """A named real distribution used for one coordinate of a parametric step."""
    dist: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dist not in _KNOWN:
            raise ValueError(f"unknown distribution {self.dist!r}; expected one of {sorted(_KNOWN)}")
        missing = [k for k in _KNOWN[self.dist] if k not in self.params and
                   not (self.dist == "choice" and k == "probs")]
        if missing:
            raise ValueError(f"{self.dist} needs parameters {missing}")
        if self.dist == "normal" and not self.params["sd"] > 0:
            raise ValueError("normal sd must be positive")
        if self.dist == "uniform" and not self.params["hi"] > self.params["lo"]:
            raise ValueError("uniform needs hi > lo")
        if self.dist == "cauchy" and not self.params["scale"] > 0:
            raise ValueError("cauchy scale must be positive")
        if self.dist == "choice":
            vals = list(self.params["values"])
            probs = self.params.get("probs") or [1.0 / len(vals)] * len(vals)
            if len(vals) != len(probs) or not vals:
                raise ValueError("choice needs equally long non-empty values and probs")
            _check_probs(probs)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        p = self.params
        if self.dist == "normal":
            return rng.normal(p["mean"], p["sd"], n)
        if self.dist == "uniform":
            return rng.uniform(p["lo"], p["hi"], n)
        if self.dist == "cauchy":
            return p["loc"] + p["scale"] * rng.standard_cauchy(n)
        if self.dist == "constant":
            return np.full(n, float(p["value"]))
        vals = np.asarray(p["values"], dtype=float)
        probs = np.asarray(p.get("probs") or [1.0 / len(vals)] * len(vals), dtype=float)
        return vals[draw_indices(rng, np.cumsum(probs), n)]

    @property
    def mean(self) -> float | None:
        """Exact mean, or None when it does not exist or has no closed form."""
        p = self.params
        if self.dist == "normal":
            return float(p["mean"])
        if self.dist == "uniform":
            return 0.5 * (p["lo"] + p["hi"])
        if self.dist == "constant":
            return float(p["value"])
        if self.dist == "choice":
            vals = list(p["values"])
            probs = p.get("probs") or [1.0 / len(vals)] * len(vals)
            return float(np.dot(vals, probs))
        return None

    def density(self, x):
        """Exact density where one exists (not for ``constant``/``choice``)."""
        p = self.params
        x = np.asarray(x, dtype=float)
        if self.dist == "normal":
            z = (x - p["mean"]) / p["sd"]
            return np.exp(-0.5 * z * z) / (p["sd"] * math.sqrt(2 * math.pi))
        if self.dist == "uniform":
            inside = (x > p["lo"]) & (x < p["hi"])
            return np.where(inside, 1.0 / (p["hi"] - p["lo"]), 0.0)
        if self.dist == "cauchy":
            z = (x - p["loc"]) / p["scale"]
            return 1.0 / (math.pi * p["scale"] * (1 + z * z))
        raise ValueError(f"{self.dist} has no density")

    def to_json(self) -> dict:
        return {"dist": self.dist, **self.params}

    @classmethod
    def from_json(cls, obj: dict) -> "Component":
        obj = dict(obj)
        dist = obj.pop("dist", None)
        if dist is None:
            raise ValueError("component needs a 'dist' entry")
        return cls(dist, obj)


@dataclass(frozen=True)
class ParametricSpec:
    """Independent coordinates for Aff(R) (``log_a``, ``b``) or Sol (``a``, ``b``, ``c``)."""
    family: tuple
    components: dict

    def __post_init__(self):
        names = {"affine": ("log_a", "b"), "sol": ("a", "b", "c")}.get(self.family[0])
        if names is None:
            raise ValueError(f"parametric steps are only supported for affine and sol, not {self.family[0]}")
        if set(self.components) != set(names):
            raise ValueError(f"{self.family[0]} parametric step needs components {names}")

    @property
    def height_component(self) -> Component:
        return self.components["log_a" if self.family[0] == "affine" else "c"]

    def sample(self, rng: np.random.Generator, n: int) -> list:
        if self.family[0] == "affine":
            la = self.components["log_a"].sample(rng, n)
            b = self.components["b"].sample(rng, n)
            return [AffineElement(float(x), float(y)) for x, y in zip(la, b)]
        _, p, q = self.family
        a = self.components["a"].sample(rng, n)
        b = self.components["b"].sample(rng, n)
        c = self.components["c"].sample(rng, n)
        return [SolElement(p, q, float(x), float(y), float(z)) for x, y, z in zip(a, b, c)]


def _check_probs(probs) -> np.ndarray:
    pr = np.asarray(probs, dtype=float)
    if pr.ndim != 1 or pr.size == 0:
        raise ValueError("need a non-empty probability vector")
    if np.any(pr < 0):
        raise ValueError("probabilities must be non-negative")
    if abs(pr.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"probabilities sum to {pr.sum()!r}, not 1")
    return pr


# ------------------------------------------------------------ distributions

class StepDistribution:
    """Law of one increment: a finite support with probabilities, or a parametric spec."""

    def __init__(self, support: Sequence[tuple[Any, float]] | None = None,
                 parametric: ParametricSpec | None = None, name: str = ""):
        if (support is None) == (parametric is None):
            raise ValueError("give exactly one of support or parametric")
        self.name = name
        self.parametric = parametric
        if support is not None:
            elems = [g for g, _ in support]
            if not elems:
                raise ValueError("empty support")
            fam = family_of(elems[0])
            for g in elems[1:]:
                if family_of(g) != fam:
                    raise FamilyMismatchError(f"support mixes {fam} and {family_of(g)}")
            self.elements = elems
            self.probs = _check_probs([p for _, p in support])
            self.cdf = np.cumsum(self.probs)
            self.family = fam
        else:
            self.elements = None
            self.probs = None
            self.cdf = None
            self.family = parametric.family

    @property
    def is_finite(self) -> bool:
        return self.parametric is None

    def identity(self):
        if self.is_finite:
            return identity_like(self.elements[0])
        if self.family[0] == "affine":
            return AffineElement()
        return SolElement(self.family[1], self.family[2])

    def sample(self, rng: np.random.Generator, n: int) -> list:
        if self.is_finite:
            return [self.elements[i] for i in draw_indices(rng, self.cdf, n)]
        return self.parametric.sample(rng, n)

    def height_increments(self) -> np.ndarray:
        """Height increment of each support element (finite support only)."""
        return np.array([float(height(g)) for g in self.elements])

    def items(self):
        return list(zip(self.elements, self.probs.tolist()))

    def split(self, predicate: Callable[[Any], bool]) -> tuple[list, list]:
        """Partition the support into the parts inside and outside ``predicate``."""
        inside, outside = [], []
        for g, p in self.items():
            (inside if predicate(g) else outside).append((g, p))
        return inside, outside

    def to_json(self) -> dict:
        out: dict = {"family": _family_json(self.family)}
        if self.name:
            out["name"] = self.name
        if self.is_finite:
            out["support"] = [[element_to_json(g), p] for g, p in self.items()]
        else:
            out["parametric"] = {k: c.to_json() for k, c in self.parametric.components.items()}
        return out

    def __repr__(self) -> str:
        kind = f"{len(self.elements)} atoms" if self.is_finite else "parametric"
        return f"StepDistribution({self.family}, {kind}{', ' + self.name if self.name else ''})"


# ------------------------------------------------------------------ presets

def point_mass(g) -> StepDistribution:
    return StepDistribution([(g, 1.0)], name="point-mass")


def srw_free(k: int) -> StepDistribution:
    """Simple random walk on F_k (uniform on the 2k generators and inverses)."""
    gens = [FreeWord.generator(k, s * i) for i in range(1, k + 1) for s in (1, -1)]
    return StepDistribution([(g, 1.0 / (2 * k)) for g in gens], name=f"srw-F{k}")


def srw_z(forward: float = 0.5) -> StepDistribution:
    """Nearest-neighbour walk on Z (the free group of rank one)."""
    support = [(FreeWord.generator(1, 1), forward), (FreeWord.generator(1, -1), 1.0 - forward)]
    return StepDistribution([(g, p) for g, p in support if p > 0], name="walk-Z")


def switch_walk(p: int, forward: float = 0.5) -> StepDistribution:
    """Lamplighter walk along the DL_{p,p} edges: random lamp value, then a move.

    Step ``(a delta_0, +1)`` has mass ``forward/p`` and ``(a delta_{-1}, -1)``
    mass ``(1 - forward)/p`` for each ``a`` in Z_p. The vertical drift is
    ``2*forward - 1``.
    """
    support = []
    for step, mass in ((1, forward), (-1, 1.0 - forward)):
        if mass > 0:
            support += [(LampElement.switch_walk(p, a, step), mass / p) for a in range(p)]
    return StepDistribution(support, name=f"switch-walk-L{p}")


def switch_walk_switch(p: int) -> StepDistribution:
    """Symmetric lamplighter walk: random switch, random move, random switch."""
    support = []
    for m in (1, -1):
        for a in range(p):
            for b in range(p):
                support.append((LampElement(p, ((0, a), (m, b)), m), 1.0 / (2 * p * p)))
    return StepDistribution(support, name=f"switch-walk-switch-L{p}")


def lamplighter_standard(p: int) -> StepDistribution:
    """Uniform on ``{t, t^-1, delta, delta^-1}`` (for p = 2 the two switches coincide)."""
    support = [(LampElement.move(p, 1), 0.25), (LampElement.move(p, -1), 0.25),
               (LampElement.toggle(p, 1), 0.25), (LampElement.toggle(p, p - 1), 0.25)]
    return StepDistribution(support, name=f"standard-L{p}")


def dl_walk(p: int, q: int, up: float = 0.5) -> StepDistribution:
    """Vertex-level walk on DL_{p,q}: go up with probability ``up`` to a uniform child."""
    support = []
    if up > 0:
        support += [(DLMove(p, q, 1, d), up / p) for d in range(p)]
    if up < 1:
        support += [(DLMove(p, q, -1, d), (1.0 - up) / q) for d in range(q)]
    return StepDistribution(support, name=f"dl-{p}-{q}")


def affine_walk(log_a: Component, b: Component) -> StepDistribution:
    return StepDistribution(parametric=ParametricSpec(("affine",), {"log_a": log_a, "b": b}),
                            name="affine")


def sol_walk(p: float, q: float, a: Component, b: Component, c: Component) -> StepDistribution:
    return StepDistribution(parametric=ParametricSpec(("sol", p, q), {"a": a, "b": b, "c": c}),
                            name=f"sol-{p}-{q}")


# -------------------------------------------------------------------- paths

@dataclass
class SamplePath:
    """Increments ``g_1..g_n`` and positions ``x_0 = e, x_k = x_{k-1} g_k``."""
    seed: int
    index: int
    increments: list
    positions: list
    _norms: np.ndarray | None = field(default=None, repr=False)
    _heights: np.ndarray | None = field(default=None, repr=False)

    @property
    def length(self) -> int:
        return len(self.increments)

    def norms(self) -> np.ndarray:
        if self._norms is None:
            self._norms = np.array([orbit_norm(x) for x in self.positions], dtype=float)
        return self._norms

    def heights(self) -> np.ndarray:
        if self._heights is None:
            self._heights = np.array([float(height(x)) for x in self.positions])
        return self._heights

    def to_csv(self) -> str:
        """Columns: step, height, norm, coordinates (JSON of the position).

        The height column is empty for families without a height (free groups).
        """
        nm = self.norms()
        h = [""] * len(self.positions) if isinstance(self.positions[0], FreeWord) else self.heights()
        rows = ((i, h[i], nm[i], json.dumps(jsonable(element_to_json(x)), sort_keys=True))
                for i, x in enumerate(self.positions))
        return csv_text(["step", "height", "norm", "coordinates"], rows)


def simulate_walk(dist: StepDistribution, n: int, seed: int, index: int = 0) -> SamplePath:
    """Sample path of length ``n``; a pure function of ``(dist, n, seed, index)``."""
    if n < 0:
        raise ValueError("number of steps must be non-negative")
    rng = path_rng(seed, index)
    incs = dist.sample(rng, n)
    x = dist.identity()
    positions = [x]
    for g in incs:
        x = compose(x, g)
        positions.append(x)
    return SamplePath(seed, index, incs, positions)


# -------------------------------------------------------------------- drift

@dataclass(frozen=True)
class DriftEstimate:
    value: float
    stderr: float
    exact: bool
    n: int

    def to_json(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "exact": self.exact, "n": self.n}


def hill_tail_index(x: np.ndarray) -> float:
    """Hill estimator of the tail index of ``|x|`` from the top sqrt(n) order statistics."""
    a = np.sort(np.abs(np.asarray(x, dtype=float)))[::-1]
    k = max(int(math.sqrt(a.size)), 10)
    top, ref = a[:k], a[k]
    if ref <= 0:
        return math.inf
    logs = np.log(top / ref)
    m = logs.mean()
    return math.inf if m <= 0 else 1.0 / m


def vertical_drift(dist: StepDistribution, samples: int = 100_000, seed: int = 0,
                   min_tail_index: float = 1.25) -> DriftEstimate:
    """Expected height increment of one step.

    Exact for finite supports and for parametric height coordinates with a
    closed-form mean; otherwise Monte Carlo, guarded against infinite first
    moments by a Hill tail-index check.
    """
    if dist.is_finite:
        h = dist.height_increments()
        return DriftEstimate(float(np.dot(dist.probs, h)), 0.0, True, 0)
    comp = dist.parametric.height_component
    if comp.mean is not None:
        return DriftEstimate(comp.mean, 0.0, True, 0)
    x = comp.sample(stream_rng(seed, "vertical-drift"), samples)
    alpha = hill_tail_index(x)
    if alpha < min_tail_index:
        raise DivergenceError(f"height increments look heavy-tailed (tail index ~{alpha:.2f});"
                              " the first moment may be infinite")
    m, se = mean_stderr(x)
    return DriftEstimate(m, se, False, samples)


# --------------------------------------------------------------------- JSON

_FAMILY_NAMES = {"free": "free", "z": "free", "integers": "free", "lamplighter": "lamplighter",
                 "dl": "dl", "affine": "affine", "sol": "sol"}


def parse_family(obj: dict) -> tuple:
    """Family tuple from ``{"family": ..., "k"/"p"/"q": ...}``."""
    name = obj.get("family")
    if name not in _FAMILY_NAMES:
        raise ValueError(f"unknown family {name!r}")
    name = _FAMILY_NAMES[name]
    if name == "free":
        k = int(obj.get("k", 1))
        if k < 1:
            raise ValueError("free group rank k must be >= 1")
        return ("free", k)
    if name == "lamplighter":
        p = int(obj.get("p", 2))
        if p < 2:
            raise ValueError("lamp group order p must be >= 2")
        return ("lamplighter", p)
    if name == "dl":
        p, q = int(obj.get("p", 2)), int(obj.get("q", obj.get("p", 2)))
        if p < 2 or q < 2:
            raise ValueError("tree degree ≥ 2 required (p and q must be at least 2)")
        return ("dl", p, q)
    if name == "sol":
        p, q = float(obj.get("p", 1.0)), float(obj.get("q", 1.0))
        if not (p > 0 and q > 0):
            raise ValueError("Sol parameters p, q must be positive")
        return ("sol", p, q)
    return ("affine",)


def _family_json(fam: tuple) -> str:
    return fam[0]


def element_from_json(fam: tuple, obj):
    kind = fam[0]
    if kind == "free":
        if isinstance(obj, str):
            return FreeWord.parse(fam[1], obj)
        if isinstance(obj, dict):
            obj = obj.get("word", [])
        return FreeWord.from_letters(fam[1], obj)
    if kind == "lamplighter":
        lamps = obj.get("lamps", [])
        if isinstance(lamps, dict):
            lamps = [(int(k), v) for k, v in lamps.items()]
        return LampElement(fam[1], tuple(tuple(x) for x in lamps), int(obj.get("shift", 0)))
    if kind == "dl":
        return DLMove(fam[1], fam[2], int(obj["step"]), int(obj.get("digit", 0)))
    if kind == "affine":
        return AffineElement.from_ab(float(obj.get("a", 1.0)), float(obj.get("b", 0.0)))
    return SolElement(fam[1], fam[2], float(obj.get("a", 0.0)), float(obj.get("b", 0.0)),
                      float(obj.get("c", 0.0)))


def element_to_json(g):
    if isinstance(g, DLMove):
        return {"family": "dl", "step": g.step, "digit": g.digit}
    if isinstance(g, DLVertex):
        return {"family": "dl", "left": [g.left.height, list(g.left.digits)],
                "right": [g.right.height, list(g.right.digits)]}
    return g.to_json()


_PRESETS = ("srw", "point-mass", "switch-walk", "switch-walk-switch", "standard", "dl-walk")


def distribution_from_json(obj: dict) -> StepDistribution:
    """Build a step law from ``{"family", params, one of "preset"/"support"/"parametric"}``.

    Presets: ``srw`` (free groups, optional ``forward`` for Z),
    ``switch-walk`` (lamplighter, optional ``forward``),
    ``switch-walk-switch``, ``standard`` (lamplighter generators),
    ``dl-walk`` (optional ``up``), ``point-mass`` (with ``element``).
    """
    fam = parse_family(obj)
    given = [k for k in ("preset", "support", "parametric") if k in obj]
    if len(given) != 1:
        raise ValueError("step distribution needs exactly one of preset, support, parametric")
    if "support" in obj:
        support = [(element_from_json(fam, g), float(p)) for g, p in obj["support"]]
        return StepDistribution(support, name=obj.get("name", ""))
    if "parametric" in obj:
        comps = {k: Component.from_json(v) for k, v in obj["parametric"].items()}
        return StepDistribution(parametric=ParametricSpec(fam, comps), name=obj.get("name", ""))
    preset = obj["preset"]
    if preset not in _PRESETS:
        raise ValueError(f"unknown preset {preset!r}; expected one of {_PRESETS}")
    if preset == "point-mass":
        return point_mass(element_from_json(fam, obj["element"]))
    if preset == "srw" and fam[0] == "free":
        if fam[1] == 1:
            return srw_z(float(obj.get("forward", 0.5)))
        return srw_free(fam[1])
    if preset == "switch-walk" and fam[0] == "lamplighter":
        return switch_walk(fam[1], float(obj.get("forward", 0.5)))
    if preset == "switch-walk-switch" and fam[0] == "lamplighter":
        return switch_walk_switch(fam[1])
    if preset == "standard" and fam[0] == "lamplighter":
        return lamplighter_standard(fam[1])
    if preset == "dl-walk" and fam[0] == "dl":
        return dl_walk(fam[1], fam[2], float(obj.get("up", 0.5)))
    raise ValueError(f"preset {preset!r} is not available for family {fam[0]}")
