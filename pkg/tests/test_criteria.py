import itertools
import math

import numpy as np
import pytest
from scipy import stats
from hypothesis import given
from hypothesis import strategies as st

from oracles import reduce_letters
from poissonwalk.criteria import (RayMap, StripSpec, an_set_radius, an_sets_check, checkpoint_grid,
                                  entropy_criterion_check, escape_rate, quantile_radius, ray_map_for,
                                  ray_path_data, ray_tracking_statistic, reflected, strip_ball_count,
                                  strip_statistic, uniform_temperance_of_ray_gauges)
from poissonwalk.entropy import TAIL_FRACTION, DLProduct, FakeDriftOracle, TreeEnd, TrivialOracle
from poissonwalk.groups import (DLVertex, FreeWord, dl_distance, dl_walk, point_mass, simulate_walk,
                                srw_free, srw_z, switch_walk, to_dl)
from poissonwalk.groups.trees import bfs_ball


# ------------------------------------------------------------ references

def free_reference(dist, raymap, seed, paths, horizon, times, limit_factor=3):
    """Per-path distances d(x_n, pi_n(x_inf)) from explicit word arithmetic."""
    T = limit_factor * horizon
    tail_from = T - max(1, math.ceil(TAIL_FRACTION * T)) + 1
    m_max = raymap.depth(horizon)
    rows = []
    for i in range(paths):
        pos = simulate_walk(dist, T, seed, i).positions
        settled = min(len(x) for x in pos[tail_from:])
        need = max(math.ceil(len(pos[-1]) / T * T / 2), max(len(x) for x in pos[: horizon + 1]) + 1, m_max + 1)
        if settled < need:
            continue
        end = pos[-1].letters
        rows.append([(pos[t].inverse() * FreeWord(dist.family[1], end[: raymap.depth(t)])).length
                     for t in times])
    return np.array(rows)


def digit_reference(dist, raymap, seed, paths, horizon, times, span, limit_factor=3):
    """The same statistic for DL/lamplighter walks from explicit DL vertices."""
    T = limit_factor * horizon
    tail_from = T - max(1, math.ceil(TAIL_FRACTION * T)) + 1
    sign = 1 if raymap.rate > 0 else -1
    m_max = raymap.depth(horizon)
    as_dl = (lambda x: x) if dist.family[0] == "dl" else to_dl
    rows = []
    for i in range(paths):
        verts = [as_dl(x) for x in simulate_walk(dist, T, seed, i).positions]
        H = [sign * v.height for v in verts]
        need = max(max(H[: horizon + 1]), m_max, math.ceil(abs(raymap.rate) * T / 2)) + 1 + span
        if min(H[tail_from:]) < need:
            continue
        carry = verts[-1].left if sign > 0 else verts[-1].right
        end = DLProduct(1 if sign > 0 else 2, carry.base, carry.digits)
        rows.append([dl_distance(verts[t], raymap.point(end, t)) for t in times])
    return np.array(rows)


def test_free_ray_distances_match_reference():
    dist = srw_free(2)
    raymap = RayMap(dist.family, 0.5)
    times = [1, 5, 20, 60]
    data = ray_path_data(dist, raymap, 3, 60, 60, times, chunk=16)
    ref = free_reference(dist, raymap, 3, 60, 60, times)
    assert data.distances.shape == ref.shape
    assert np.array_equal(data.distances, ref)


@pytest.mark.parametrize("dist,span", [(switch_walk(2, 0.7), 2), (switch_walk(3, 0.2), 2), (dl_walk(2, 3, 0.7), 1)])
def test_digit_ray_distances_match_reference(dist, span):
    raymap = ray_map_for(dist, seed=0)
    times = [1, 7, 30, 50]
    data = ray_path_data(dist, raymap, 4, 40, 50, times, chunk=16)
    ref = digit_reference(dist, raymap, 4, 40, 50, times, span)
    assert data.distances.shape == ref.shape and ref.shape[0] > 20
    assert np.array_equal(data.distances, ref)


def test_ray_map_points():
    f = RayMap(("free", 2), 0.5)
    assert f.point(TreeEnd(2, (1, 2, 1, 2)), 5) == FreeWord(2, (1, 2))
    dlmap = RayMap(("dl", 2, 2), 0.4)
    v = dlmap.point(DLProduct(1, 0, (1, 0, 1)), 5)
    assert v == DLVertex(v.left, v.right) and v.height == 2 and v.left.digits[-2:] == (1, 0)
    back = RayMap(("dl", 2, 3), -0.4).point(DLProduct(2, 0, (2, 1)), 5)
    assert back.height == -2 and back.right.digits[-2:] == (2, 1)


def test_deterministic_walk_tracks_its_ray_exactly():
    a = FreeWord.generator(2, 1)
    rep = ray_tracking_statistic(point_mass(a), RayMap(("free", 2), 1.0), 5, 200, seed=0)
    assert rep.max == [0.0] * len(rep.times) and rep.passed


def test_ray_tracking_decays_on_f2():
    rep = ray_tracking_statistic(srw_free(2), None, 200, 1000, seed=1, checkpoints=[100])
    assert rep.rate == pytest.approx(0.5, abs=0.01)
    assert rep.at(1000) < rep.at(100) and rep.passed


@given(st.integers(1, 10 ** 6), st.lists(st.integers(1, 10 ** 6), max_size=5))
def test_checkpoint_grid(horizon, extra):
    extra = [e for e in extra if e <= horizon]
    grid = checkpoint_grid(horizon, extra)
    assert grid == sorted(set(grid)) and grid[-1] == horizon and grid[0] >= 1
    assert set(extra) <= set(grid)


def test_escape_rate_f2_and_generic_path():
    est = escape_rate(srw_free(2), 400, 400, seed=2)
    assert abs(est.value - 0.5) < 4 * est.stderr + 0.01
    lamp = escape_rate(switch_walk(2, 0.5), 30, 100, seed=2)
    assert lamp.value > 0


# ---------------------------------------------------------------- strips

def geodesic_distance(xi, eta, h, k):
    """Distance from ``h`` to the explicit vertex set of the geodesic between two ends.

    The geodesic joins the two rays at their branch point ``xi[:c]``.
    """
    c = next(j for j in range(min(len(xi), len(eta))) if xi[j] != eta[j])
    verts = {FreeWord(k, xi[:j]) for j in range(c, len(xi) + 1)}
    verts |= {FreeWord(k, eta[:j]) for j in range(c, len(eta) + 1)}
    return min((x.inverse() * h).length for x in verts)


def random_end(rng, k, depth, start=()):
    letters = list(start)
    while len(letters) < depth:
        x = int(rng.choice([s * i for i in range(1, k + 1) for s in (1, -1)]))
        if not letters or letters[-1] != -x:
            letters.append(x)
    return tuple(letters)


@pytest.mark.parametrize("k", [2, 3])
def test_strip_distance_and_counts_match_bfs(k):
    rng = np.random.default_rng(k)
    R = 6 if k == 2 else 4
    ball = bfs_ball(FreeWord(k), R, lambda w: [w * FreeWord.generator(k, s * i)
                                              for i in range(1, k + 1) for s in (1, -1)])
    for c in range(0, 4):
        stem = random_end(rng, k, c)
        xi = random_end(rng, k, 12, stem)
        eta = random_end(rng, k, 12, stem)
        while eta[c] == xi[c] or (c and eta[c] == -stem[-1]) or (c and xi[c] == -stem[-1]):
            xi, eta = random_end(rng, k, 12, stem), random_end(rng, k, 12, stem)
        b_minus, b_plus = TreeEnd(k, xi), TreeEnd(k, eta)
        dist = {h: geodesic_distance(xi, eta, h, k) for h in ball}
        for width in range(0, 3):
            spec = StripSpec(k, width)
            for h, d in dist.items():
                assert spec.distance_to_geodesic(b_minus, b_plus, h) == d
            for r in range(R + 1):
                brute = sum(1 for h, d in dist.items() if d <= width and ball[h] <= r)
                assert strip_ball_count(c, r, width, k) == brute


@given(st.integers(0, 2 ** 32 - 1))
def test_strip_distance_is_equivariant(s):
    rng = np.random.default_rng(s)
    xi, eta = random_end(rng, 2, 20), random_end(rng, 2, 20)
    if xi[0] == eta[0]:
        return
    h = FreeWord.from_letters(2, random_end(rng, 2, 4))
    g = FreeWord.from_letters(2, random_end(rng, 2, 3))
    spec = StripSpec(2, 1)
    d0 = spec.distance_to_geodesic(TreeEnd(2, xi), TreeEnd(2, eta), h)
    d1 = spec.distance_to_geodesic(TreeEnd(2, xi).translate(g), TreeEnd(2, eta).translate(g), g * h)
    assert d0 == d1


def test_strip_statistic_and_empty_control():
    rep = strip_statistic(srw_free(2), StripSpec(2, 2), 500, 300, seed=6)
    assert rep.p_hat > 0.9 and rep.passed
    assert rep.trace[-1] <= rep.threshold
    empty = strip_statistic(srw_free(2), StripSpec(2, 2, kind="empty"), 200, 300, seed=6)
    assert empty.p_hat == 0 and not empty.passed


def test_width_zero_strip_is_linear():
    rep = strip_statistic(srw_free(2), StripSpec(2, 0), 300, 300, seed=7)
    assert all(t <= b + 1e-12 for t, b in zip(rep.trace, rep.bound))


def test_reflected_law():
    back = reflected(srw_free(2))
    assert sorted((g.letters, p) for g, p in back.items()) == sorted((g.letters, p) for g, p in srw_free(2).items())


# -------------------------------------------------------------- quantiles

def test_quantile_radius_on_z():
    k = quantile_radius(srw_z(), 100, 0.5)
    assert k == 12
    # normal approximation: P(|x_n| <= k) >= 3/4 needs k ~ z_0.875 sqrt(n)
    assert abs(k - math.ceil(stats.norm.ppf(0.875) * 10)) <= 2
    assert quantile_radius(srw_z(), 100, 2.0) == 0
    assert quantile_radius(point_mass(FreeWord.generator(1, 1)), 17, 0.1) == 17


@pytest.mark.parametrize("p", [0.1, 0.5, 1.0])
def test_quantile_radius_monotone_along_parity(p):
    ks = [quantile_radius(srw_z(), n, p) for n in range(1, 61)]
    assert all(ks[i + 2] >= ks[i] for i in range(len(ks) - 2))


def test_quantile_radius_brute_force():
    n, p = 6, 0.4
    counts = {}
    for w in itertools.product([1, -1], repeat=n):
        r = len(reduce_letters(w))
        counts[r] = counts.get(r, 0) + 1
    acc, k_ref = 0, None
    for r in sorted(counts):
        acc += counts[r]
        if acc / 2 ** n >= 1 - p / 2:
            k_ref = r
            break
    assert quantile_radius(srw_z(), n, p) == k_ref


# -------------------------------------------------------- entropy criterion

def test_entropy_criterion_trivial_and_fake():
    ok = entropy_criterion_check(srw_z(), TrivialOracle(), 60, 200, seed=8)
    assert ok.passed and abs(ok.running_min[-1]) < 0.2
    bad = entropy_criterion_check(srw_z(), FakeDriftOracle(0.3), 60, 200, seed=8)
    assert not bad.passed and bad.running_min[-1] > 0.2


# ----------------------------------------------------------------- A_n sets

def test_an_set_radius():
    assert an_set_radius("ball", 100, 0.1, 0.5, 2) == 60
    assert an_set_radius("ray-ball", 100, 0.5, 0.5, 2) == math.floor(50 / (2 * math.log(3)))
    with pytest.raises(ValueError):
        an_set_radius("cube", 1, 0.1, 0.5, 2)


def test_an_sets_ray_ball_passes_full_ball_fails():
    rm = RayMap(("free", 2), 0.5)
    ray = an_sets_check(srw_free(2), "ray-ball", 400, 400, seed=9, epsilon=0.5, raymap=rm)
    assert 0.15 < ray.acceptance < 0.35
    assert ray.passed
    full = an_sets_check(srw_free(2), "ball", 400, 400, seed=9, epsilon=0.5, raymap=rm)
    assert full.hits_ok and not full.counts_ok


def test_uniform_temperance_along_rays():
    rep = uniform_temperance_of_ray_gauges(RayMap(("free", 2), 0.5), TreeEnd(2, (1, 2) * 20), [4, 20, 60], 5)
    assert rep.extra["uniform"]
    rep = uniform_temperance_of_ray_gauges(RayMap(("dl", 2, 2), 0.4), DLProduct(1, 0, (1, 0) * 20), [5, 50], 5)
    assert rep.extra["uniform"]
