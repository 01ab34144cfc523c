"""Ray, strip and entropy criteria as finite-scale diagnostics over path ensembles.

Traces are recorded on a checkpoint grid (log-spaced times plus any requested
ones); limits are never claimed, only running extrema over the computed range
compared with explicit thresholds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .densities import DEFAULT_BUDGET, exact_nstep, norm_law
from .ensemble import DEFAULT_CHUNK, map_chunks
from .entropy import (TAIL_FRACTION, RNDerivativeOracle, TreeEnd, _fixed_times,
                      resolve_free_chunk, smb_statistic)
from .errors import HorizonTooShortError, ResolutionError
from .gauges import GrowthReport, ball_volumes, dl_vertex_gauge, free_word_gauge, growth_report
from .groups.core import orbit_norm
from .groups.engine import FreeEngine, confluence_heights, digit_engine, step_indices
from .groups.free import FreeWord
from .groups.trees import DLVertex, TreeVertex
from .groups.walks import DriftEstimate, StepDistribution, simulate_walk, vertical_drift
from .reports import csv_text, mean_stderr
from .rng import derive_seed

PILOT_PATHS = 1000
MIN_ACCEPTANCE = 0.01
MAX_EXCLUDED = 0.5


def checkpoint_grid(horizon: int, extra: Sequence[int] = (), points: int = 25) -> list[int]:
    """Log-spaced times in 1..horizon, always including ``horizon`` and ``extra``."""
    grid = {int(round(x)) for x in np.logspace(0, math.log10(max(horizon, 1)), points)}
    grid.update(int(t) for t in extra)
    grid.add(horizon)
    return sorted(t for t in grid if 1 <= t <= horizon)


# ---------------------------------------------------------------- escape rate

def escape_rate(dist: StepDistribution, paths: int, steps: int, seed: int,
                chunk: int = DEFAULT_CHUNK, threads: int = 1) -> DriftEstimate:
    """Monte Carlo ``E|x_n| / n`` for the natural orbit norm of the family."""
    if dist.family[0] == "free" and dist.is_finite:
        eng = FreeEngine(dist)

        def run(a, b):
            return eng.run(step_indices(dist, seed, a, b, steps)).length / steps

        vals = np.concatenate(map_chunks(run, paths, chunk, threads))
    else:
        vals = np.array([orbit_norm(simulate_walk(dist, steps, seed, i).positions[-1]) / steps
                         for i in range(paths)])
    m, se = mean_stderr(vals)
    return DriftEstimate(m, se, False, paths)


# -------------------------------------------------------------------- ray maps

@dataclass(frozen=True)
class RayMap:
    """``pi_n(b)``: the point at distance ``floor(rate * n)`` along the ray to ``b``.

    For free groups ``b`` is a :class:`TreeEnd` and ``pi_n(b)`` its prefix; for
    DL/lamplighter families ``b`` is a :class:`DLProduct` and ``pi_n(b)`` the
    vertex at height ``floor(|V| n)`` of the tree carrying the end, paired with
    the base ray of the other tree.
    """
    family: tuple
    rate: float

    def depth(self, n: int) -> int:
        return int(math.floor(abs(self.rate) * n))

    def point(self, b, n: int):
        m = self.depth(n)
        if self.family[0] == "free":
            if m > b.depth:
                raise ResolutionError(f"end known to depth {b.depth}, ray point needs {m}")
            return FreeWord(self.family[1], b.letters[:m])
        p, q = _dl_degrees(self.family)
        carry = TreeVertex(p if b.factor == 1 else q, m,
                           tuple(b.digit(t) for t in range(min(b.base, m) + 1, m + 1)))
        if b.factor == 1:
            return DLVertex(carry, TreeVertex.ray(q, -m))
        return DLVertex(TreeVertex.ray(p, -m), carry)

    def to_json(self) -> dict:
        return {"family": list(self.family), "rate": self.rate}


def _dl_degrees(family: tuple) -> tuple[int, int]:
    if family[0] == "lamplighter":
        return family[1], family[1]
    return family[1], family[2]


def ray_map_for(dist: StepDistribution, seed: int, rate: float | None = None,
                pilot_paths: int = PILOT_PATHS, pilot_steps: int = 1000,
                threads: int = 1) -> RayMap:
    """Ray map with the supplied rate, the exact vertical drift, or a pilot escape rate.

    The pilot uses a seed derived from ``seed``, disjoint from the evaluation paths.
    """
    if rate is None:
        if dist.family[0] in ("dl", "lamplighter"):
            rate = vertical_drift(dist).value
        else:
            rate = escape_rate(dist, pilot_paths, pilot_steps, derive_seed(seed, "pilot"),
                               threads=threads).value
    return RayMap(dist.family, float(rate))


# ----------------------------------------------------------- ray path data

@dataclass
class RayPathData:
    times: list
    lengths: np.ndarray      # resolved paths x checkpoints: |x_n|
    distances: np.ndarray    # resolved paths x checkpoints: d(x_n, pi_n(x_inf))
    prefixes: np.ndarray     # resolved paths x requested depth: limit-point letters
    excluded: int
    total: int


def _free_ray_data(dist, raymap, seed, paths, horizon, times, limit_factor, prefix_depth,
                   chunk, threads) -> RayPathData:
    col = {t: j for j, t in enumerate(times)}
    m_max = raymap.depth(horizon)

    def run(a, b):
        res = resolve_free_chunk(dist, seed, a, b, horizon, limit_factor,
                                 depth_needed=max(m_max, prefix_depth) + 1)
        n = b - a
        lengths = np.zeros((n, len(times)), dtype=np.int64)
        dists = np.zeros((n, len(times)), dtype=np.int64)

        def obs(t, st):
            j = col.get(t)
            if j is None:
                return
            m = raymap.depth(t)
            lengths[:, j] = st.length
            dists[:, j] = st.length + m - 2 * np.minimum(st.agree, m)

        res.engine.run(res.idx[:, :horizon], target=res.final.stack,
                       target_len=res.final.length, observer=obs)
        ok = res.stable
        return lengths[ok], dists[ok], res.final.stack[ok, :prefix_depth], int((~ok).sum())

    parts = map_chunks(run, paths, chunk, threads)
    return _merge_ray(parts, times, paths, prefix_depth)


def _digit_ray_data(dist, raymap, seed, paths, horizon, times, limit_factor, chunk,
                    threads) -> RayPathData:
    if raymap.rate == 0:
        raise ValueError("the DL ray map needs a nonzero vertical drift")
    eng = digit_engine(dist)
    sign = 1 if raymap.rate > 0 else -1
    col = {t: j for j, t in enumerate(times)}
    steps = max(limit_factor, 1) * horizon
    tail_from = steps - max(1, math.ceil(TAIL_FRACTION * steps)) + 1
    m_max = raymap.depth(horizon)
    margin = getattr(eng, "span", 1)

    def split(st):
        left, right = st.digits()
        return (left, right) if sign > 0 else (right, left)

    def run(a, b):
        idx = step_indices(dist, seed, a, b, steps)
        n = b - a
        top = np.full(n, np.iinfo(np.int64).min)
        tail_min = np.full(n, np.iinfo(np.int64).max)

        def obs1(t, st):
            H = sign * st.height
            if t <= horizon:
                np.maximum(top, H, out=top)
            if t >= tail_from:
                np.minimum(tail_min, H, out=tail_min)

        final = eng.run(idx, observer=obs1)
        offset = final.offset
        carry_end = split(final)[0].copy()
        need = np.maximum(np.maximum(top, m_max), math.ceil(abs(raymap.rate) * steps / 2)) + 1 + margin
        ok = tail_min >= need
        lengths = np.zeros((n, len(times)), dtype=np.int64)
        dists = np.zeros((n, len(times)), dtype=np.int64)

        def obs2(t, st):
            j = col.get(t)
            if j is None:
                return
            m = raymap.depth(t)
            H = sign * st.height
            carry, other = split(st)
            mm = np.full(n, m, dtype=np.int64)
            c1 = confluence_heights(carry, H, carry_end, mm, offset)
            c2 = confluence_heights(other, -H, np.zeros_like(other), -mm, offset)
            d1 = H + m - 2 * c1
            d2 = -H - m - 2 * c2
            dists[:, j] = d1 + d2 - np.abs(H - m)
            lengths[:, j] = _dl_norm_rows(carry, other, H, offset)

        eng.run(idx[:, :horizon], observer=obs2, offset=offset)
        return lengths[ok], dists[ok], np.zeros((int(ok.sum()), 0), np.int8), int((~ok).sum())

    parts = map_chunks(run, paths, chunk, threads)
    return _merge_ray(parts, times, paths, 0)


def _dl_norm_rows(carry, other, H, offset) -> np.ndarray:
    """DL distance from the base vertex, row-wise."""
    zero = np.zeros(H.shape, dtype=np.int64)
    c1 = confluence_heights(carry, H, np.zeros_like(carry), zero, offset)
    c2 = confluence_heights(other, -H, np.zeros_like(other), zero, offset)
    return (H - 2 * c1) + (-H - 2 * c2) - np.abs(H)


def _merge_ray(parts, times, total, prefix_depth) -> RayPathData:
    k = len(times)
    lengths = np.concatenate([p[0] for p in parts]) if parts else np.zeros((0, k), np.int64)
    dists = np.concatenate([p[1] for p in parts]) if parts else np.zeros((0, k), np.int64)
    prefixes = np.concatenate([p[2] for p in parts]) if parts else np.zeros((0, prefix_depth), np.int8)
    excluded = sum(p[3] for p in parts)
    if total and excluded > MAX_EXCLUDED * total:
        raise HorizonTooShortError(f"{excluded} of {total} paths did not resolve their limit point")
    return RayPathData(list(times), lengths, dists, prefixes, excluded, total)


def ray_path_data(dist, raymap, seed, paths, horizon, times, limit_factor=3, prefix_depth=0,
                  chunk=DEFAULT_CHUNK, threads=1) -> RayPathData:
    if dist.family != raymap.family:
        raise ValueError(f"ray map for {raymap.family} used with {dist.family}")
    if dist.family[0] == "free":
        return _free_ray_data(dist, raymap, seed, paths, horizon, times, limit_factor,
                              prefix_depth, chunk, threads)
    if dist.family[0] in ("dl", "lamplighter"):
        return _digit_ray_data(dist, raymap, seed, paths, horizon, times, limit_factor, chunk, threads)
    raise ValueError(f"no ray map for family {dist.family}")


# --------------------------------------------------------------- ray tracking

@dataclass
class RayTrackingReport:
    times: list
    mean: list
    max: list
    stderr: list
    rate: float
    threshold: float
    paths: int
    excluded: int

    @property
    def headline(self) -> float:
        return self.mean[-1]

    @property
    def passed(self) -> bool:
        return self.headline < self.threshold

    def at(self, t: int) -> float:
        return self.mean[self.times.index(t)]

    def to_json(self) -> dict:
        return {"statistic": "d(x_n, pi_n(x_inf)) / n", "times": self.times, "mean": self.mean,
                "max": self.max, "stderr": self.stderr, "rate": self.rate, "headline": self.headline,
                "threshold": self.threshold, "paths": self.paths, "excluded": self.excluded,
                "verdict": "PASS" if self.passed else "FAIL"}

    def to_csv(self) -> str:
        return csv_text(["n", "mean", "max", "stderr"], zip(self.times, self.mean, self.max, self.stderr))


def ray_tracking_statistic(dist: StepDistribution, raymap: RayMap | None, paths: int, horizon: int,
                           seed: int, checkpoints: Sequence[int] = (), threshold: float = 0.1,
                           limit_factor: int = 3, chunk: int = DEFAULT_CHUNK,
                           threads: int = 1) -> RayTrackingReport:
    """Trace of mean and max of ``d(x_n, pi_n(x_inf)) / n`` over resolved paths.

    The distance is the word metric for free groups and the DL graph metric
    (orbit gauge) for DL/lamplighter walks.
    """
    raymap = raymap or ray_map_for(dist, seed, threads=threads)
    times = checkpoint_grid(horizon, checkpoints)
    data = ray_path_data(dist, raymap, seed, paths, horizon, times, limit_factor, 0, chunk, threads)
    t = np.asarray(times, dtype=float)
    r = data.distances / t
    n = r.shape[0]
    mean = r.mean(axis=0) if n else np.full(len(times), np.nan)
    mx = r.max(axis=0) if n else np.full(len(times), np.nan)
    se = r.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(len(times))
    return RayTrackingReport(times, mean.tolist(), mx.tolist(), se.tolist(), raymap.rate, threshold,
                             n, data.excluded)


def uniform_temperance_of_ray_gauges(raymap: RayMap, b, times: Sequence[int], max_radius: int,
                                     budget: int = 2_000_000) -> GrowthReport:
    """Growth of gauge balls centred at ``pi_n(b)`` for each ``n`` in ``times``.

    Returns the report of the fastest-growing centre; ``extra`` lists the rate
    and ball sizes at every centre.
    """
    if raymap.family[0] == "free":
        gauge = free_word_gauge(raymap.family[1])
    else:
        gauge = dl_vertex_gauge(*_dl_degrees(raymap.family))
    rows = []
    worst = None
    for n in times:
        center = raymap.point(b, n)
        vols = ball_volumes(gauge, max_radius, "enumerate", budget, center=center)
        rep = growth_report(vols)
        rows.append({"n": n, "rate": rep.rate, "volumes": vols})
        if worst is None or rep.rate > worst.rate:
            worst = rep
    worst.extra = {"centers": rows, "max_rate": worst.rate,
                   "uniform": len({tuple(r["volumes"]) for r in rows}) == 1}
    return worst


# ---------------------------------------------------------------------- strips

@dataclass(frozen=True)
class StripSpec:
    """``S(b-, b+)``: the ``width``-neighbourhood of the geodesic between two ends.

    ``kind="empty"`` is the negative control: every strip is empty.
    """
    rank: int
    width: int
    kind: str = "geodesic"

    def __post_init__(self):
        if self.kind not in ("geodesic", "empty"):
            raise ValueError(f"unknown strip kind {self.kind!r}")
        if self.width < 0:
            raise ValueError("strip width must be >= 0")

    def distance_to_geodesic(self, b_minus: TreeEnd, b_plus: TreeEnd, h: FreeWord) -> int:
        c = _common_prefix(b_minus.letters, b_plus.letters)
        if c >= min(b_minus.depth, b_plus.depth):
            raise ResolutionError("ends not resolved past their common prefix")
        if len(h) >= min(b_minus.depth, b_plus.depth):
            raise ResolutionError("ends must be known deeper than the tested word")
        m = max(b_minus.common_prefix_length(h), b_plus.common_prefix_length(h))
        if m > c:
            return len(h) - m
        return len(h) + c - 2 * m

    def contains(self, b_minus: TreeEnd, b_plus: TreeEnd, h: FreeWord) -> bool:
        if self.kind == "empty":
            return False
        return self.distance_to_geodesic(b_minus, b_plus, h) <= self.width

    def count(self, c, radius) -> np.ndarray:
        """``|S ∩ B(e, radius)|`` for ends whose common prefix has length ``c``."""
        if self.kind == "empty":
            return np.zeros(np.broadcast(np.asarray(c), np.asarray(radius)).shape, dtype=float)
        return strip_ball_count(c, radius, self.width, self.rank)

    def to_json(self) -> dict:
        return {"rank": self.rank, "width": self.width, "kind": self.kind}


def _common_prefix(a: Sequence[int], b: Sequence[int]) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def strip_ball_count(c, radius, width: int, k: int) -> np.ndarray:
    """Vertices of the Cayley tree of F_k within ``width`` of the geodesic ``(xi, eta)``
    and within ``radius`` of the identity, where ``c = |xi ∧ eta|``.

    The geodesic passes through ``w = xi[:c]``. Off-geodesic branches hang at
    each geodesic vertex; at ``w`` one of them (when ``c > 0``) leads back
    towards the identity and is counted separately.
    """
    c = np.asarray(c, dtype=np.int64)
    R = np.asarray(radius, dtype=np.int64)
    c, R = np.broadcast_arrays(c, R)
    q = 2 * k - 1
    out = (c <= R).astype(float) + 2.0 * np.maximum(R - c, 0)
    for i in range(1, width + 1):
        shell = q ** (i - 1)
        # branches at geodesic vertices beyond w, on both sides
        out += 2.0 * (2 * k - 2) * shell * np.maximum(R - c - i, 0)
        # branches at w pointing away from the identity
        out += ((2 * k - 2) - (c > 0)) * shell * (c + i <= R)
        # the branch at w towards the identity: leave the path back to e at distance a from w
        for a in range(1, i + 1):
            on_path = a <= c
            if a == i:
                out += on_path * (c - a <= R)
            else:
                fan = np.where(a < c, 2 * k - 2, 2 * k - 1) * q ** (i - a - 1)
                out += on_path * fan * (c + i - 2 * a <= R)
    return out


@dataclass
class StripReport:
    p_hat: float
    p_hat_stderr: float
    times: list
    trace: list
    bound: list
    threshold: float
    spec: StripSpec
    paths: int
    excluded: int

    @property
    def passed(self) -> bool:
        return self.p_hat > 0 and self.trace[-1] <= self.threshold

    def to_json(self) -> dict:
        return {"p_hat": self.p_hat, "p_hat_stderr": self.p_hat_stderr, "times": self.times,
                "trace": self.trace, "linear_bound": self.bound, "threshold": self.threshold,
                "strip": self.spec.to_json(), "paths": self.paths, "excluded": self.excluded,
                "verdict": "PASS" if self.passed else "FAIL"}

    def to_csv(self) -> str:
        return csv_text(["n", "trace", "linear_bound"], zip(self.times, self.trace, self.bound))


def reflected(dist: StepDistribution) -> StepDistribution:
    """The law of ``g^-1`` for ``g ~ dist``."""
    return StepDistribution([(g.inverse(), p) for g, p in dist.items()], name=f"{dist.name}-reflected")


def _end_chunk(dist, seed, a, b, horizon, limit_factor, times):
    """Final words, settled depths and lengths at ``times`` for free paths ``a..b-1``."""
    steps = max(limit_factor, 1) * horizon
    idx = step_indices(dist, seed, a, b, steps)
    col = {t: j for j, t in enumerate(times)}
    n = b - a
    lengths = np.zeros((n, len(times)), dtype=np.int64)
    tail_min = np.full(n, np.iinfo(np.int64).max)
    tail_from = steps - max(1, math.ceil(TAIL_FRACTION * steps)) + 1

    def obs(t, st):
        j = col.get(t)
        if j is not None:
            lengths[:, j] = st.length
        if t >= tail_from:
            np.minimum(tail_min, st.length, out=tail_min)

    final = FreeEngine(dist).run(idx, observer=obs)
    return final.stack, tail_min, lengths


def _row_common_prefix(a: np.ndarray, b: np.ndarray, limit: np.ndarray) -> np.ndarray:
    w = min(a.shape[1], b.shape[1])
    diff = (a[:, :w] != b[:, :w]) | (np.arange(w)[None, :] >= limit[:, None])
    return np.where(diff.any(axis=1), np.argmax(diff, axis=1), w)


def strip_statistic(dist: StepDistribution, spec: StripSpec, paths: int, horizon: int, seed: int,
                    threshold: float = 0.05, checkpoints: Sequence[int] = (), limit_factor: int = 3,
                    chunk: int = DEFAULT_CHUNK, threads: int = 1) -> StripReport:
    """Membership frequency of the identity in ``S(b-, b+)`` and the trace of
    ``(1/n) log+ |S(b-, b+) ∩ B(e, |x_n|)|``.

    Each bilateral path supplies ``b+`` (forward walk), ``b-`` (reflected walk,
    disjoint seed) and ``|x_n|`` from its forward half.
    """
    if dist.family[0] != "free" or dist.family[1] != spec.rank:
        raise ValueError(f"strip on F_{spec.rank} used with {dist.family}")
    times = checkpoint_grid(horizon, checkpoints)
    back = reflected(dist)
    back_seed = derive_seed(seed, "reflected")

    def run(a, b):
        fw, fw_depth, lengths = _end_chunk(dist, seed, a, b, horizon, limit_factor, times)
        bw, bw_depth, _ = _end_chunk(back, back_seed, a, b, horizon, limit_factor, [])
        depth = np.minimum(fw_depth, bw_depth)
        c = _row_common_prefix(fw, bw, depth)
        ok = c < depth
        return c[ok], lengths[ok], int((~ok).sum())

    parts = map_chunks(run, paths, chunk, threads)
    c = np.concatenate([p[0] for p in parts])
    lengths = np.concatenate([p[1] for p in parts])
    excluded = sum(p[2] for p in parts)
    if paths and excluded > MAX_EXCLUDED * paths:
        raise HorizonTooShortError(f"{excluded} of {paths} bilateral paths did not separate their ends")
    if spec.kind == "empty":
        member = np.zeros(c.shape, dtype=float)
    else:
        member = (c <= spec.width).astype(float)
    p_hat, p_se = mean_stderr(member) if member.size else (0.0, 0.0)
    t = np.asarray(times, dtype=float)
    counts = spec.count(c[:, None], lengths)
    logp = np.log(np.maximum(counts, 1.0)) / t
    trace = logp.mean(axis=0) if logp.shape[0] else np.full(len(times), np.nan)
    bound = np.log(2 * t + 1) / t
    return StripReport(p_hat, p_se, times, trace.tolist(), bound.tolist(), threshold, spec,
                       int(c.size), excluded)


# -------------------------------------------------------------- quantile radius

def quantile_radius(dist: StepDistribution, n: int, p: float, norm: Callable = orbit_norm,
                    law=None, budget: int = DEFAULT_BUDGET) -> int:
    """``K_n = min{k : P(|x_n| <= k) >= 1 - p/2}`` from the exact n-step law."""
    law = law if law is not None else exact_nstep(dist, n, budget)
    radii = norm_law(law, norm)
    ks = sorted(radii)
    target = 1.0 - p / 2.0
    if target <= 0:
        return int(next(k for k in ks if radii[k] > 0))
    acc = 0.0
    for k in ks:
        acc += radii[k]
        if acc >= target - 1e-12:
            return int(k)
    return int(ks[-1])


# ------------------------------------------------------------ entropy criterion

@dataclass
class CriterionReport:
    name: str
    trace: list
    running_min: list
    epsilon: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "trace": self.trace, "running_min": self.running_min,
                "epsilon": self.epsilon, "verdict": "PASS" if self.passed else "FAIL", **self.extra}

    def to_csv(self) -> str:
        return csv_text(["n", "statistic", "running_min"],
                        zip(range(1, len(self.trace) + 1), self.trace, self.running_min))


def entropy_criterion_check(dist: StepDistribution, oracle: RNDerivativeOracle, n_max: int, paths: int,
                            seed: int, epsilon: float = 0.2, budget: int = DEFAULT_BUDGET,
                            limit_factor: int = 3) -> CriterionReport:
    """Ensemble trace of ``-(1/n)[log mu^n(x_n) + log d x_n nu / d nu (x_inf)]``.

    The n-step probabilities are exact. PASS when the running minimum at
    ``n_max`` is within ``epsilon`` of zero.
    """
    smb = smb_statistic(dist, n_max, seed, paths, budget)
    rn = oracle.along_paths(dist, seed, paths, n_max, _fixed_times([n_max]), limit_factor=limit_factor)
    rn_mean = rn.trace_sum / max(rn.resolved, 1)
    trace = smb.trace - rn_mean
    run_min = np.minimum.accumulate(trace)
    passed = bool(abs(run_min[-1]) < epsilon)
    return CriterionReport("entropy-criterion", trace.tolist(), run_min.tolist(), epsilon, passed,
                           {"smb_trace": smb.trace.tolist(), "log_derivative_trace": rn_mean.tolist(),
                            "paths": paths, "excluded": rn.excluded})


# ------------------------------------------------------------------- A_n sets

@dataclass
class AnSetsReport:
    kind: str
    times: list
    hit_frequency: list
    log_count_rate: list
    epsilon: float
    acceptance: float
    paths: int
    radii: list

    @property
    def hits_ok(self) -> bool:
        """Condition (1): the running max of the hit frequency stays positive."""
        return max(self.hit_frequency[len(self.times) // 2:]) > 0

    @property
    def counts_ok(self) -> bool:
        """Condition (2): ``(1/n) log |A_n|`` ends below ``epsilon``."""
        return self.log_count_rate[-1] < self.epsilon

    @property
    def passed(self) -> bool:
        return self.hits_ok and self.counts_ok

    def to_json(self) -> dict:
        return {"kind": self.kind, "times": self.times, "hit_frequency": self.hit_frequency,
                "log_count_rate": self.log_count_rate, "radii": self.radii, "epsilon": self.epsilon,
                "acceptance": self.acceptance, "paths": self.paths,
                "condition_hits": self.hits_ok, "condition_counts": self.counts_ok,
                "verdict": "PASS" if self.passed else "FAIL"}

    def to_csv(self) -> str:
        return csv_text(["n", "radius", "hit_frequency", "log_count_rate"],
                        zip(self.times, self.radii, self.hit_frequency, self.log_count_rate))


def an_set_radius(kind: str, n: int, epsilon: float, rate: float, k: int) -> int:
    if kind == "ball":
        return int(math.floor(n * (rate + epsilon)))
    if kind == "ray-ball":
        return int(math.floor(epsilon * n / (2 * math.log(2 * k - 1))))
    raise ValueError(f"unknown A_n kind {kind!r}")


def an_sets_check(dist: StepDistribution, kind: str, paths: int, horizon: int, seed: int,
                  epsilon: float = 0.1, gamma: Sequence[int] = (1,), raymap: RayMap | None = None,
                  checkpoints: Sequence[int] = (), limit_factor: int = 3,
                  chunk: int = DEFAULT_CHUNK, threads: int = 1) -> AnSetsReport:
    """Hit frequencies and log-sizes of sets ``A_n`` on F_k, for paths whose limit
    point starts with the letters ``gamma`` (rejection sampling).

    ``kind="ball"``: ``A_n`` is the ball of radius ``n (A + epsilon)`` at the
    identity. ``kind="ray-ball"``: the ball of radius ``epsilon n / (2 log(2k-1))``
    centred at ``pi_n(x_inf)``.
    """
    if dist.family[0] != "free" or dist.family[1] < 2:
        raise ValueError("A_n checks are implemented for free groups of rank >= 2")
    k = dist.family[1]
    raymap = raymap or ray_map_for(dist, seed, threads=threads)
    times = checkpoint_grid(horizon, checkpoints)
    gamma = tuple(int(x) for x in gamma)
    data = ray_path_data(dist, raymap, seed, paths, horizon, times, limit_factor, len(gamma), chunk, threads)
    keep = np.all(data.prefixes == np.asarray(gamma, dtype=np.int8)[None, :], axis=1) if gamma else \
        np.ones(data.prefixes.shape[0], dtype=bool)
    acceptance = float(keep.sum()) / paths if paths else 0.0
    if acceptance < MIN_ACCEPTANCE:
        raise ResolutionError(f"conditioning on {gamma} accepted {acceptance:.3%} of paths")
    radii = [an_set_radius(kind, t, epsilon, raymap.rate, k) for t in times]
    gauge = free_word_gauge(k)
    r = np.asarray(radii)[None, :]
    if kind == "ball":
        hit = data.lengths[keep] <= r
    else:
        hit = data.distances[keep] <= r
    freq = hit.mean(axis=0) if hit.shape[0] else np.zeros(len(times))
    rate = [math.log(gauge.volume(rad)) / t for rad, t in zip(radii, times)]
    return AnSetsReport(kind, times, freq.tolist(), rate, epsilon, acceptance, int(keep.sum()), radii)
