"""Stopping-time transforms of step laws.

Splitting ``mu = alpha + beta`` with ``alpha = mu|_L`` and stopping the walk at
the first increment in ``L`` gives the law ``theta = sum_n beta^{*n} * alpha``
of ``x_tau``. Truncated series are kept as sub-probability measures with their
deficit reported, never renormalised.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import stats

from .densities import (DEFAULT_BUDGET, DensityGrid, SparseDistribution, convolve,
                        differential_entropy, sparse_convolve)
from .errors import BudgetExceededError, NoTriggerError
from .groups.core import compose, orbit_norm
from .groups.walks import SamplePath, StepDistribution, draw_indices
from .reports import mean_stderr
from .rng import stream_rng

Predicate = Callable[[Any], bool]


@dataclass(frozen=True)
class StoppingTimeSpec:
    """``tau = min{n > 0 : g_n in L}`` for a trigger set ``L`` given as a predicate."""
    trigger: Predicate
    name: str = "L"

    @classmethod
    def members(cls, elements, name: str | None = None) -> "StoppingTimeSpec":
        keep = set(elements)
        return cls(lambda g: g in keep, name or "{" + ", ".join(str(g) for g in keep) + "}")

    @classmethod
    def everything(cls) -> "StoppingTimeSpec":
        return cls(lambda g: True, "all")


@dataclass
class MeasureSplit:
    alpha: Any
    beta: Any

    @property
    def alpha_mass(self) -> float:
        return self.alpha.mass()

    @property
    def beta_mass(self) -> float:
        return 0.0 if self.beta is None else self.beta.mass()

    @classmethod
    def from_spec(cls, dist: StepDistribution, spec: StoppingTimeSpec) -> "MeasureSplit":
        inside, outside = dist.split(spec.trigger)
        if not inside:
            raise NoTriggerError(f"trigger set {spec.name} has zero mass")
        alpha = SparseDistribution(dict(inside), dist.family, sub=True)
        beta = SparseDistribution(dict(outside), dist.family, sub=True) if outside else None
        return cls(alpha, beta)

    @classmethod
    def from_grid(cls, mu: DensityGrid, mask: np.ndarray) -> "MeasureSplit":
        if not np.any(mask & (mu.values > 0)):
            raise NoTriggerError("trigger region has zero mass")
        rest = ~mask
        beta = mu.restrict(rest) if np.any(rest & (mu.values > 0)) else None
        return cls(mu.restrict(mask), beta)


@dataclass
class InducedMeasure:
    theta: Any
    terms: int
    deficit: float
    alpha_mass: float
    beta_mass: float

    def to_json(self) -> dict:
        return {"terms": self.terms, "deficit": self.deficit, "alpha_mass": self.alpha_mass,
                "beta_mass": self.beta_mass}


def truncation_order(beta_mass: float, eps: float) -> int:
    """Smallest N with ``beta_mass^(N+1) <= eps`` (the deficit after N + 1 terms)."""
    if beta_mass <= 0:
        return 0
    if beta_mass >= 1:
        raise ValueError("the trigger set must have positive mass")
    n = max(0, math.ceil(math.log(eps) / math.log(beta_mass)) - 1)
    while n > 0 and beta_mass ** n <= eps:    # guard against rounding in the logs
        n -= 1
    while beta_mass ** (n + 1) > eps:
        n += 1
    return n


def induced_measure(split: MeasureSplit, eps: float = 1e-12, budget: int = DEFAULT_BUDGET,
                    max_terms: int | None = None) -> InducedMeasure:
    """``theta_N = sum_{n<=N} beta^{*n} * alpha`` with ``N`` from :func:`truncation_order`.

    ``beta`` sits on the left: the increments before the stopping time come
    first. Works for sparse laws and grid densities alike.
    """
    a_mass, b_mass = split.alpha_mass, split.beta_mass
    n_terms = truncation_order(b_mass, eps)
    if max_terms is not None and n_terms > max_terms:
        raise BudgetExceededError(f"reaching deficit {eps} needs {n_terms} terms (limit {max_terms})", n_terms)
    grid = isinstance(split.alpha, DensityGrid)
    theta = split.alpha
    power = None
    for _ in range(n_terms):
        if grid:
            power = split.beta if power is None else convolve(power, split.beta)
            theta = theta + convolve(power, split.alpha)
        else:
            power = split.beta if power is None else sparse_convolve(power, split.beta, budget)
            theta = theta + sparse_convolve(power, split.alpha, budget)
    deficit = max(0.0, 1.0 - theta.mass())
    return InducedMeasure(theta, n_terms, deficit, a_mass, b_mass)


def stopping_times(path: SamplePath | list, spec: StoppingTimeSpec) -> np.ndarray:
    """Indices ``n`` (1-based) with ``g_n`` in the trigger set, increasing."""
    incs = path.increments if isinstance(path, SamplePath) else path
    taus = np.array([n for n, g in enumerate(incs, 1) if spec.trigger(g)], dtype=np.int64)
    if taus.size == 0:
        raise NoTriggerError(f"no increment in {spec.name} among the first {len(incs)} steps")
    return taus


def stopped_path(path: SamplePath, spec: StoppingTimeSpec) -> list:
    """Positions ``x_{tau_1}, x_{tau_2}, ...``."""
    return [path.positions[t] for t in stopping_times(path, spec)]


# ------------------------------------------------------------- sampling

def _trigger_mask(dist: StepDistribution, spec: StoppingTimeSpec) -> np.ndarray:
    return np.array([bool(spec.trigger(g)) for g in dist.elements])


def sample_tau(dist: StepDistribution, spec: StoppingTimeSpec, samples: int, seed: int,
               block: int = 1 << 16) -> np.ndarray:
    """I.i.d. copies of ``tau``: gaps between hits in one long increment stream."""
    mask = _trigger_mask(dist, spec)
    if not mask.any():
        raise NoTriggerError(f"trigger set {spec.name} has zero mass")
    out = []
    have = 0
    last = 0
    offset = 0
    b = 0
    while have < samples:
        rng = stream_rng(seed, "tau", b)
        hits = np.nonzero(mask[draw_indices(rng, dist.cdf, block)])[0] + offset + 1
        if hits.size:
            gaps = np.diff(np.concatenate([[last], hits]))
            out.append(gaps)
            have += gaps.size
            last = hits[-1]
        offset += block
        b += 1
    return np.concatenate(out)[:samples]


def sample_stopped(dist: StepDistribution, spec: StoppingTimeSpec, samples: int, seed: int,
                   block: int = 1 << 16) -> tuple[list, np.ndarray]:
    """I.i.d. pairs ``(x_tau, tau)`` from one long increment stream cut at the hits."""
    mask = _trigger_mask(dist, spec)
    if not mask.any():
        raise NoTriggerError(f"trigger set {spec.name} has zero mass")
    positions, taus = [], []
    x, t = dist.identity(), 0
    b = 0
    while len(taus) < samples:
        idx = draw_indices(stream_rng(seed, "stopped", b), dist.cdf, block)
        for i in idx.tolist():
            x = compose(x, dist.elements[i])
            t += 1
            if mask[i]:
                positions.append(x)
                taus.append(t)
                if len(taus) == samples:
                    break
                x, t = dist.identity(), 0
        b += 1
    return positions, np.array(taus, dtype=np.int64)


# --------------------------------------------------------------- checks

@dataclass
class CheckResult:
    name: str
    value: float
    reference: float
    stderr: float
    residual: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "value": self.value, "reference": self.reference,
                "stderr": self.stderr, "residual": self.residual, "passed": self.passed,
                "extra": self.extra}


def expected_tau_identity_check(dist: StepDistribution, spec: StoppingTimeSpec, samples: int,
                                seed: int, rel_tol: float = 0.01) -> CheckResult:
    """Compare the sample mean of ``tau`` with ``1 / ||alpha||``."""
    split = MeasureSplit.from_spec(dist, spec)
    expected = 1.0 / split.alpha_mass
    taus = sample_tau(dist, spec, samples, seed)
    m, se = mean_stderr(taus)
    resid = abs(m - expected)
    return CheckResult("expected-tau", m, expected, se, resid, resid <= rel_tol * expected,
                       {"samples": samples, "alpha_mass": split.alpha_mass})


def first_moment_bound_check(dist: StepDistribution, spec: StoppingTimeSpec, samples: int, seed: int,
                             norm: Callable = orbit_norm) -> CheckResult:
    """``mean |x_tau| <= mean(tau) * L(mu) + 2 stderr`` with ``L(mu) = sum mu(g) |g|``."""
    l_mu = math.fsum(p * norm(g) for g, p in dist.items())
    pos, taus = sample_stopped(dist, spec, samples, seed)
    l_theta, se = mean_stderr([norm(x) for x in pos])
    e_tau, se_tau = mean_stderr(taus)
    bound = e_tau * l_mu
    return CheckResult("first-moment-bound", l_theta, bound, se, l_theta - bound,
                       l_theta <= bound + 2 * se,
                       {"L_mu": l_mu, "mean_tau": e_tau, "mean_tau_stderr": se_tau, "samples": samples})


def theta_chisquare(dist: StepDistribution, spec: StoppingTimeSpec, samples: int, seed: int,
                    eps: float = 1e-12, min_expected: float = 5.0, budget: int = DEFAULT_BUDGET) -> CheckResult:
    """Chi-square test of the series ``theta`` against sampled ``x_tau``.

    Atoms with expected count at least ``min_expected`` get their own bin; the
    rest, together with the truncation deficit, form one pooled bin whose
    expected mass is one minus the listed atoms.
    """
    ind = induced_measure(MeasureSplit.from_spec(dist, spec), eps, budget)
    pos, _ = sample_stopped(dist, spec, samples, seed)
    atoms = sorted(((p, g) for g, p in ind.theta.items() if p * samples >= min_expected),
                   key=lambda t: -t[0])
    index = {g: i for i, (_, g) in enumerate(atoms)}
    counts = np.zeros(len(atoms) + 1)
    for x in pos:
        counts[index.get(x, len(atoms))] += 1
    probs = np.array([p for p, _ in atoms] + [0.0])
    probs[-1] = max(0.0, 1.0 - probs[:-1].sum())
    if probs[-1] * samples < min_expected:
        counts[-2] += counts[-1]
        probs[-2] += probs[-1]
        counts, probs = counts[:-1], probs[:-1]
    expected = probs / probs.sum() * samples
    chi2, pval = stats.chisquare(counts, expected)
    return CheckResult("theta-chisquare", float(pval), 0.01, 0.0, float(chi2), bool(pval > 0.01),
                       {"bins": int(counts.size), "deficit": ind.deficit, "terms": ind.terms})


# ---------------------------------------------------------- densities

@dataclass
class BoundedTransform:
    theta: DensityGrid
    threshold: float
    sup: float
    sup_bound: float
    deficit: float
    alpha_mass: float
    entropy: float
    terms: int

    def to_json(self) -> dict:
        return {"threshold": self.threshold, "sup": self.sup, "sup_bound": self.sup_bound,
                "deficit": self.deficit, "alpha_mass": self.alpha_mass, "entropy": self.entropy,
                "terms": self.terms}


def default_threshold(mu: DensityGrid) -> float:
    """Smallest ``j`` among the grid values with ``mu(rho <= j) >= 1/2``."""
    order = np.argsort(mu.values, kind="stable")
    cum = np.cumsum(mu.values[order]) * mu.width
    k = int(np.searchsorted(cum, 0.5 * mu.mass() - 1e-12))
    return float(mu.values[order][min(k, order.size - 1)])


def bounded_density_transform(mu: DensityGrid, threshold: float | None = None,
                              region: tuple[float, float] | None = None, eps: float = 1e-12) -> BoundedTransform:
    """Stop at the first increment in ``L`` and return the density of ``x_tau``.

    ``L`` is ``{rho <= threshold}`` (default :func:`default_threshold`) or,
    if ``region=(lo, hi)`` is given, the cells whose centres lie in it; then
    ``threshold`` is the sup of ``rho`` on ``L``. Every term of the series has
    density at most ``threshold * ||beta||^n``, hence the bound
    ``threshold / (1 - ||beta||)`` on the whole series.
    """
    if region is not None:
        c = mu.centers
        mask = (c > region[0]) & (c < region[1])
        threshold = float(mu.values[mask].max()) if mask.any() else 0.0
    else:
        threshold = default_threshold(mu) if threshold is None else threshold
        mask = mu.values <= threshold
    split = MeasureSplit.from_grid(mu, mask)
    ind = induced_measure(split, eps)
    beta = split.beta_mass
    bound = threshold / (1.0 - beta) if beta < 1 else math.inf
    return BoundedTransform(ind.theta, threshold, ind.theta.sup(), bound, ind.deficit,
                            split.alpha_mass, differential_entropy(ind.theta), ind.terms)


# ------------------------------------------------------- entropy scaling

def stopping_index_times(dist: StepDistribution, spec: StoppingTimeSpec, m: int, horizon: int):
    """``times_fn`` giving ``tau_m`` for each row of an index matrix."""
    mask = _trigger_mask(dist, spec)

    def times(idx: np.ndarray) -> np.ndarray:
        hits = np.cumsum(mask[idx[:, :horizon]], axis=1)
        reached = hits[:, -1] >= m
        if not reached.all():
            raise NoTriggerError(f"{int((~reached).sum())} paths saw fewer than {m} stops "
                                 f"within {horizon} steps")
        return (np.argmax(hits >= m, axis=1) + 1)[:, None]

    return times


def entropy_scaling_check(dist: StepDistribution, spec: StoppingTimeSpec, oracle, paths: int,
                          horizon: int, seed: int, rel_tol: float = 0.05, limit_factor: int = 3,
                          chunk: int = 1024, threads: int = 1) -> CheckResult:
    """Compare the entropy of the stopped walk with ``E(tau) h(mu)``.

    ``h(mu)`` comes from :func:`furstenberg_entropy_estimate`. The stopped
    walk's entropy is ``(1/m) log d x_{tau_m} nu / d nu (x_inf)`` averaged over
    paths, with ``m = ||alpha|| * horizon / 2`` so that ``tau_m`` falls near the
    middle of the horizon. ``E(tau) = 1 / ||alpha||`` is exact.
    """
    from .entropy import _check_excluded, furstenberg_entropy_estimate

    split = MeasureSplit.from_spec(dist, spec)
    e_tau = 1.0 / split.alpha_mass
    m = max(1, int(split.alpha_mass * horizon / 2))
    h_mu = furstenberg_entropy_estimate(dist, oracle, paths, horizon, seed, shifts=max(1, horizon // 2),
                                        limit_factor=limit_factor, chunk=chunk, threads=threads)
    data = oracle.along_paths(dist, seed, paths, horizon, stopping_index_times(dist, spec, m, horizon),
                              limit_factor=limit_factor, chunk=chunk, threads=threads)
    _check_excluded(data, horizon)
    h_theta, se_theta = mean_stderr(data.values[:, 0] / m)
    predicted = e_tau * h_mu.estimate
    resid = abs(h_theta - predicted)
    joint = math.hypot(se_theta, e_tau * h_mu.stderr)
    scale = abs(predicted) if predicted else 1.0
    passed = resid <= rel_tol * scale if predicted else resid <= 2 * joint + 1e-12
    return CheckResult("entropy-scaling", h_theta, predicted, se_theta, resid, passed,
                       {"h_mu": h_mu.estimate, "h_mu_stderr": h_mu.stderr, "expected_tau": e_tau,
                        "stops": m, "joint_stderr": joint, "excluded": data.excluded})
