"""Entropy estimators: SMB statistic, Furstenberg entropy, ergodic RN averages.

Limit points of free-group walks are approximated by the reduced word at an
extended horizon ``T = limit_factor * horizon``. A path counts as resolved
when, over the last 10% of those ``T`` steps, its length never drops below
both ``ceil(l * T / 2)`` (``l`` the drift, supplied or ``|x_T| / T``) and one
more than the longest word seen up to ``horizon``; then every prefix
comparison made up to ``horizon`` is against a settled part of the limit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .densities import DEFAULT_BUDGET, nstep_laws
from .ensemble import DEFAULT_CHUNK, map_chunks
from .errors import HorizonTooShortError, ResolutionError
from .groups.engine import FreeEngine, step_indices
from .groups.free import FreeWord
from .groups.walks import StepDistribution, simulate_walk, vertical_drift
from .reports import EstimatorReport, mean_stderr
from .rng import path_rng

TAIL_FRACTION = 0.1
MAX_EXCLUDED = 0.5


# ---------------------------------------------------------- boundary points

@dataclass(frozen=True)
class TreeEnd:
    """An end of the Cayley tree of F_k known to ``depth`` letters."""
    rank: int
    letters: tuple[int, ...]

    @classmethod
    def from_word(cls, w: FreeWord) -> "TreeEnd":
        return cls(w.rank, w.letters)

    @property
    def depth(self) -> int:
        return len(self.letters)

    def truncate(self, m: int) -> "TreeEnd":
        if m > self.depth:
            raise ResolutionError(f"end known to depth {self.depth}, asked for {m}")
        return TreeEnd(self.rank, self.letters[:m])

    def translate(self, g: FreeWord) -> "TreeEnd":
        """``g . xi``; needs depth > |g| so the result is still a deep end."""
        if self.depth <= g.length:
            raise ResolutionError(f"translating by a word of length {g.length} needs depth > {g.length}")
        w = g * FreeWord(self.rank, self.letters)
        return TreeEnd(self.rank, w.letters)

    def common_prefix_length(self, g: FreeWord) -> int:
        n = 0
        for x, y in zip(g.letters, self.letters):
            if x != y:
                break
            n += 1
        return n


@dataclass(frozen=True)
class RealPoint:
    """A limit point on the real line (boundary of Aff(R) walks)."""
    value: float


@dataclass(frozen=True)
class DLProduct:
    """An end of one tree factor paired with the fixed end of the other.

    ``factor`` is 1 when the left tree carries the end (positive vertical
    drift). ``digits[i]`` is the digit at height ``base + 1 + i``; digits
    below ``base`` are zero.
    """
    factor: int
    base: int
    digits: tuple[int, ...]

    def digit(self, t: int) -> int:
        i = t - self.base - 1
        if i >= len(self.digits):
            raise ResolutionError(f"end known up to height {self.base + len(self.digits)}")
        return 0 if i < 0 else self.digits[i]


# ------------------------------------------------------------------ oracles

@dataclass
class RNPathData:
    """Log RN derivatives ``log dx_n nu/dnu (x_inf)`` along resolved paths."""
    rows: np.ndarray          # ensemble indices of resolved paths
    values: np.ndarray        # resolved paths x recorded times
    times: np.ndarray         # the recorded times, same shape as values
    trace_sum: np.ndarray     # per n: sum over resolved paths of log derivative / n
    tail_mean: np.ndarray     # per resolved path: mean over the trace tail of log derivative / n
    excluded: int
    total: int

    @property
    def resolved(self) -> int:
        return self.rows.size


TimesFn = Callable[[np.ndarray], np.ndarray]


def _fixed_times(times) -> TimesFn:
    t = np.asarray(times, dtype=np.int64)
    return lambda idx: np.broadcast_to(t, (idx.shape[0], t.size))


class RNDerivativeOracle:
    """Radon-Nikodym derivative ``d g nu / d nu`` of a harmonic measure."""
    family: tuple = ()

    def log_derivative(self, g, xi) -> float:
        raise NotImplementedError

    def derivative(self, g, xi) -> float:
        return math.exp(self.log_derivative(g, xi))

    def along_paths(self, dist: StepDistribution, seed: int, paths: int, horizon: int,
                    times_fn: TimesFn, tail_start: int | None = None, limit_factor: int = 3,
                    drift: float | None = None, chunk: int = DEFAULT_CHUNK, threads: int = 1) -> RNPathData:
        raise NotImplementedError


class TrivialOracle(RNDerivativeOracle):
    """Derivative identically 1 (trivial boundary)."""

    def log_derivative(self, g, xi) -> float:
        return 0.0

    def along_paths(self, dist, seed, paths, horizon, times_fn, tail_start=None, limit_factor=3,
                    drift=None, chunk=DEFAULT_CHUNK, threads=1) -> RNPathData:
        return _closed_form_paths(dist, seed, paths, horizon, times_fn, lambda t: np.zeros_like(t, float),
                                  chunk, threads)


class FakeDriftOracle(RNDerivativeOracle):
    """Negative control: every increment contributes ``-drift`` to the log derivative.

    This is not the derivative of any harmonic measure; it exists to check that
    the entropy criterion rejects it.
    """

    def __init__(self, drift: float = 0.3):
        self.drift = drift

    def log_derivative(self, g, xi) -> float:
        return -self.drift * len(g)

    def along_paths(self, dist, seed, paths, horizon, times_fn, tail_start=None, limit_factor=3,
                    drift=None, chunk=DEFAULT_CHUNK, threads=1) -> RNPathData:
        return _closed_form_paths(dist, seed, paths, horizon, times_fn,
                                  lambda t: -self.drift * t.astype(float), chunk, threads)


def _closed_form_paths(dist, seed, paths, horizon, times_fn, func, chunk, threads) -> RNPathData:
    def run(a, b):
        idx = step_indices(dist, seed, a, b, horizon) if dist.is_finite else np.zeros((b - a, horizon), np.int8)
        return times_fn(idx)

    times = np.concatenate(map_chunks(run, paths, chunk, threads)) if paths else np.zeros((0, 0), np.int64)
    n = np.arange(1, horizon + 1)
    per_n = func(n) / n
    return RNPathData(np.arange(paths), func(times), times, per_n * paths,
                      np.full(paths, per_n[len(per_n) // 2:].mean() if horizon else 0.0), 0, paths)


class FreeSRWOracle(RNDerivativeOracle):
    """Simple random walk on F_k: ``d g nu / d nu (xi) = (2k-1)^(2j - |g|)``.

    ``j`` is the length of the common prefix of ``g`` and ``xi``. The harmonic
    measure gives the cylinder of a word ``w`` mass ``(2k)^-1 (2k-1)^-(|w|-1)``.
    """

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("rank must be >= 1")
        self.k = k
        self.family = ("free", k)
        self.base = 2 * k - 1

    def exponent(self, g: FreeWord, xi: TreeEnd) -> int:
        if xi.depth < g.length + 1:
            raise ResolutionError(f"end known to depth {xi.depth}; need at least {g.length + 1}")
        return 2 * xi.common_prefix_length(g) - g.length

    def derivative_exact(self, g: FreeWord, xi: TreeEnd) -> Fraction:
        return Fraction(self.base) ** self.exponent(g, xi)

    def log_derivative(self, g: FreeWord, xi: TreeEnd) -> float:
        return self.exponent(g, xi) * math.log(self.base)

    def cylinder_mass(self, w: FreeWord) -> Fraction:
        if w.length == 0:
            return Fraction(1)
        return Fraction(1, 2 * self.k) / Fraction(self.base) ** (w.length - 1)

    def along_paths(self, dist, seed, paths, horizon, times_fn, tail_start=None, limit_factor=3,
                    drift=None, chunk=DEFAULT_CHUNK, threads=1) -> RNPathData:
        if dist.family != self.family:
            raise ValueError(f"oracle for {self.family} used with {dist.family}")
        log_b = math.log(self.base)
        tail_start = tail_start or max(1, horizon // 2)
        n_tail = horizon - tail_start + 1

        def run(a, b):
            res = resolve_free_chunk(dist, seed, a, b, horizon, limit_factor, drift)
            times = times_fn(res.idx[:, :horizon])
            values = np.zeros(times.shape)
            trace = np.zeros(horizon)
            tail = np.zeros(b - a)
            ok = res.stable

            def obs(t, st):
                ld = (2 * st.agree - st.length).astype(float)
                hit = times == t
                if hit.any():
                    values[hit] = np.broadcast_to(ld[:, None], times.shape)[hit]
                trace[t - 1] = ld[ok].sum() / t
                if t >= tail_start:
                    tail[:] += ld / t

            res.engine.run(res.idx[:, :horizon], target=res.final.stack, target_len=res.final.length,
                           observer=obs)
            return (np.arange(a, b)[ok], values[ok] * log_b, times[ok], trace * log_b,
                    tail[ok] * log_b / n_tail, int((~ok).sum()))

        parts = map_chunks(run, paths, chunk, threads)
        return _merge(parts, horizon, paths)


def _merge(parts, horizon, total) -> RNPathData:
    rows = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, np.int64)
    values = np.concatenate([p[1] for p in parts]) if parts else np.zeros((0, 0))
    times = np.concatenate([p[2] for p in parts]) if parts else np.zeros((0, 0), np.int64)
    trace = np.zeros(horizon)
    for p in parts:
        trace += p[3]
    tail = np.concatenate([p[4] for p in parts]) if parts else np.zeros(0)
    excluded = sum(p[5] for p in parts)
    return RNPathData(rows, values, times, trace, tail, excluded, total)


@dataclass
class ResolvedChunk:
    idx: np.ndarray
    engine: FreeEngine
    final: object
    stable: np.ndarray


def resolve_free_chunk(dist: StepDistribution, seed: int, a: int, b: int, horizon: int,
                       limit_factor: int = 3, drift: float | None = None,
                       depth_needed: np.ndarray | int | None = None) -> ResolvedChunk:
    """Simulate paths ``a..b-1`` to ``limit_factor * horizon`` and flag resolved limits.

    ``depth_needed`` adds a further per-path lower bound on the settled depth.
    """
    steps = max(limit_factor, 1) * horizon
    idx = step_indices(dist, seed, a, b, steps)
    eng = FreeEngine(dist)
    n = b - a
    max_len = np.zeros(n, dtype=np.int64)
    tail_min = np.full(n, np.iinfo(np.int64).max)
    tail_from = steps - max(1, math.ceil(TAIL_FRACTION * steps)) + 1

    def obs(t, st):
        if t <= horizon:
            np.maximum(max_len, st.length, out=max_len)
        if t >= tail_from:
            np.minimum(tail_min, st.length, out=tail_min)

    final = eng.run(idx, observer=obs)
    rate = np.full(n, drift) if drift is not None else final.length / max(steps, 1)
    need = np.maximum(np.ceil(rate * steps / 2).astype(np.int64), max_len + 1)
    if depth_needed is not None:
        need = np.maximum(need, depth_needed)
    return ResolvedChunk(idx, eng, final, tail_min >= need)


def _check_excluded(data: RNPathData, horizon: int):
    if data.total and data.excluded > MAX_EXCLUDED * data.total:
        raise HorizonTooShortError(
            f"{data.excluded} of {data.total} paths did not resolve their limit point "
            f"(horizon {horizon}); increase the horizon or the limit factor")


# --------------------------------------------------------------- estimators

def furstenberg_entropy_estimate(dist: StepDistribution, oracle: RNDerivativeOracle, paths: int,
                                 horizon: int, seed: int, shifts: int | None = None,
                                 limit_factor: int = 3, drift: float | None = None,
                                 chunk: int = DEFAULT_CHUNK, threads: int = 1) -> EstimatorReport:
    """Monte Carlo estimate of ``E log d x_1 nu / d nu (x_inf)``.

    Each path contributes the first-increment term paired with its own limit
    point, averaged over the first ``shifts`` shifted paths: by the cocycle
    identity this is ``(1/shifts) log d x_shifts nu / d nu (x_inf)``, and
    every shifted term has the law of the first-increment term. ``shifts=1``
    is the plain first-increment estimator; the default ``horizon // 2``
    reduces the variance by a factor of order ``horizon``.
    """
    shifts = max(1, horizon // 2) if shifts is None else shifts
    if not 1 <= shifts <= horizon:
        raise ValueError("shifts must lie in 1..horizon")
    data = oracle.along_paths(dist, seed, paths, horizon, _fixed_times([shifts]),
                              limit_factor=limit_factor, drift=drift, chunk=chunk, threads=threads)
    _check_excluded(data, horizon)
    per_path = data.values[:, 0] / shifts
    raw, se = mean_stderr(per_path)
    trace = data.trace_sum / max(data.resolved, 1)
    return EstimatorReport(max(raw, 0.0), se, data.resolved, trace, "furstenberg-first-increment",
                           {"raw_estimate": raw, "shifts": shifts, "excluded": data.excluded,
                            "horizon": horizon, "limit_factor": limit_factor})


def ergodic_rn_trace(dist: StepDistribution, oracle: RNDerivativeOracle, paths: int, horizon: int,
                     seed: int, limit_factor: int = 3, drift: float | None = None,
                     chunk: int = DEFAULT_CHUNK, threads: int = 1) -> EstimatorReport:
    """Ensemble trace of ``(1/n) log d x_n nu / d nu (x_inf)``.

    The headline estimate is the mean over the second half of the trace, with
    a standard error from the per-path tail means.
    """
    data = oracle.along_paths(dist, seed, paths, horizon, _fixed_times([horizon]),
                              limit_factor=limit_factor, drift=drift, chunk=chunk, threads=threads)
    _check_excluded(data, horizon)
    est, se = mean_stderr(data.tail_mean)
    trace = data.trace_sum / max(data.resolved, 1)
    return EstimatorReport(est, se, data.resolved, trace, "ergodic-rn-average",
                           {"excluded": data.excluded, "tail_start": max(1, horizon // 2)})


def limit_end(dist: StepDistribution, horizon: int, seed: int, index: int = 0,
              limit_factor: int = 3) -> tuple[list, TreeEnd]:
    """Positions up to ``horizon`` and the end approximated at the extended horizon."""
    path = simulate_walk(dist, limit_factor * horizon, seed, index)
    tail_from = len(path.positions) - max(1, math.ceil(TAIL_FRACTION * limit_factor * horizon))
    settled = min(len(x) for x in path.positions[tail_from:])
    longest = max(len(x) for x in path.positions[: horizon + 1])
    if settled < longest + 1:
        raise ResolutionError(f"path {index}: limit settled only to depth {settled}, need {longest + 1}")
    end = TreeEnd.from_word(path.positions[-1]).truncate(settled)
    return path.positions[: horizon + 1], end


def ergodic_rn_average(dist: StepDistribution, oracle: RNDerivativeOracle, horizon: int, seed: int,
                       index: int = 0, limit_factor: int = 3) -> np.ndarray:
    """Trace ``(1/n) log d x_n nu / d nu (x_inf)``, n = 1..horizon, for one path."""
    if isinstance(oracle, (TrivialOracle, FakeDriftOracle)):
        return np.zeros(horizon) if isinstance(oracle, TrivialOracle) else np.full(horizon, -oracle.drift)
    positions, end = limit_end(dist, horizon, seed, index, limit_factor)
    return np.array([oracle.log_derivative(positions[n], end) / n for n in range(1, horizon + 1)])


def per_step_log_derivatives(dist: StepDistribution, oracle: FreeSRWOracle, horizon: int, seed: int,
                             index: int = 0, limit_factor: int = 3) -> np.ndarray:
    """``log d g_k nu / d nu (x_{k-1}^{-1} x_inf)`` for k = 1..horizon."""
    positions, end = limit_end(dist, horizon, seed, index, limit_factor)
    out = np.empty(horizon)
    for k in range(1, horizon + 1):
        g = positions[k - 1].inverse() * positions[k]
        out[k - 1] = oracle.log_derivative(g, end.translate(positions[k - 1].inverse()))
    return out


def smb_statistic(dist: StepDistribution, n: int, seed: int, paths: int = 1000,
                  budget: int = DEFAULT_BUDGET) -> EstimatorReport:
    """``-(1/n) log mu^{*n}(x_n)`` with the exact n-step law.

    The trace holds ensemble means for 1..n; ``extra["running_min"]`` is the
    running minimum of that trace, the finite-range stand-in for a liminf.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    walks = [simulate_walk(dist, n, seed, i).positions for i in range(paths)]
    stats = np.zeros((paths, n))
    for m, law in enumerate(nstep_laws(dist, n, budget), start=1):
        for i, pos in enumerate(walks):
            stats[i, m - 1] = -math.log(law.prob(pos[m])) / m
    trace = stats.mean(axis=0)
    est, se = mean_stderr(stats[:, -1])
    return EstimatorReport(est, se, paths, trace, "smb-exact-law",
                           {"running_min": np.minimum.accumulate(trace)})


@dataclass
class BorelCantelliVerdict:
    integral_bound_ok: bool
    max_mean: float
    limsup: float
    epsilon: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"integral_bound_ok": self.integral_bound_ok, "max_mean": self.max_mean,
                "limsup": self.limsup, "epsilon": self.epsilon, "passed": self.passed}


def borel_cantelli_check(values: np.ndarray, bound: float, epsilon: float = 0.05,
                         tail_fraction: float = 0.5) -> BorelCantelliVerdict:
    """Finite-scale check that ``limsup (1/n) log f_n <= epsilon`` on every path.

    ``values[i, n-1]`` is ``f_n`` on path ``i``. The hypothesis ``int f_n <= C``
    is checked on ensemble means; the limsup is the largest value of
    ``(1/n) log f_n`` over the last ``tail_fraction`` of the range and all paths.
    """
    v = np.atleast_2d(np.asarray(values, dtype=float))
    if np.any(v <= 0):
        raise ValueError("f_n must be positive")
    n = np.arange(1, v.shape[1] + 1)
    means = v.mean(axis=0)
    start = int(v.shape[1] * (1 - tail_fraction))
    rates = np.log(v[:, start:]) / n[start:]
    limsup = float(rates.max())
    return BorelCantelliVerdict(bool(np.all(means <= bound)), float(means.max()), limsup, epsilon,
                                limsup <= epsilon)


# ------------------------------------------------------------------ Aff(R)

def affine_limits(dist: StepDistribution, paths: int, horizon: int, seed: int):
    """First increments and limit points ``b_inf = lim x_n(0)`` of contracting Aff(R) walks."""
    if dist.family[0] != "affine":
        raise ValueError("affine_limits needs an Aff(R) walk")
    drift = vertical_drift(dist, seed=seed)
    if not drift.value < 0:
        raise ValueError("limit points exist only for contracting walks (E log a < 0)")
    la1 = np.empty(paths)
    b1 = np.empty(paths)
    lim = np.empty(paths)
    for i in range(paths):
        incs = dist.sample(path_rng(seed, i), horizon)
        la = np.array([g.log_a for g in incs])
        bb = np.array([g.b for g in incs])
        scale = np.exp(np.concatenate([[0.0], np.cumsum(la)[:-1]]))
        lim[i] = float((scale * bb).sum())
        la1[i], b1[i] = la[0], bb[0]
    return la1, b1, lim


def furstenberg_entropy_affine(dist: StepDistribution, paths: int, horizon: int, seed: int) -> EstimatorReport:
    """Histogram estimate of the Furstenberg entropy of the limit law on R.

    ``d g nu / d nu (x) = rho(g^-1 x) / (a rho(x))`` with ``rho`` the density
    of the limit law, estimated on dyadic bins of width about
    ``sd * N^(-1/5)``. The bias of this plug-in estimate is not controlled.
    """
    la1, b1, lim = affine_limits(dist, paths, horizon, seed)
    shifted = (lim - b1) * np.exp(-la1)
    spread = float(np.std(lim)) or 1.0
    width = 2.0 ** round(math.log2(spread * paths ** (-0.2)))
    edges_lo = math.floor(min(lim.min(), shifted.min()) / width) * width
    nbins = int(math.ceil((max(lim.max(), shifted.max()) - edges_lo) / width)) + 1
    counts = np.bincount(((lim - edges_lo) // width).astype(np.int64), minlength=nbins)
    dens = counts / (paths * width)
    r_lim = dens[((lim - edges_lo) // width).astype(np.int64)]
    r_sh = dens[((shifted - edges_lo) // width).astype(np.int64)]
    ok = (r_lim > 0) & (r_sh > 0)
    vals = np.log(r_sh[ok] / r_lim[ok]) - la1[ok]
    est, se = mean_stderr(vals)
    return EstimatorReport(est, se, int(ok.sum()), np.array([est]), "estimate, uncontrolled bias",
                           {"bin_width": width, "dropped": int((~ok).sum())})
