import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import graph_distances, bfs_matrix, reduce_letters
from poissonwalk.gauges import (Gauge, ball_pairs, ball_volume, ball_volumes, check_subadditive,
                                dl_vertex_gauge, free_word_gauge, growth_report, integer_gauge,
                                lamplighter_orbit_gauge, lamplighter_word_gauge, random_pairs,
                                sphere_sizes, temperance_estimate)
from poissonwalk.groups import FreeWord, LampElement


def brute_force_free_ball(k, radius):
    letters = [s * i for i in range(1, k + 1) for s in (1, -1)]
    seen = set()
    for n in range(radius + 1):
        for w in itertools.product(letters, repeat=n):
            seen.add(reduce_letters(w))
    return len(seen)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_free_volume_formula_matches_brute_force(k):
    g = free_word_gauge(k)
    for r in range(5 if k < 3 else 4):
        assert ball_volume(g, r, method="formula") == brute_force_free_ball(k, r)
        assert ball_volume(g, r, method="enumerate") == brute_force_free_ball(k, r)


def test_f2_volumes():
    assert ball_volumes(free_word_gauge(2), 5) == [1, 5, 17, 53, 161, 485]


def test_orbit_gauge_matches_cayley_bfs():
    # the switch-walk Cayley graph of Z_2 wr Z is DL_{2,2}, so the orbit norm is a graph distance
    gauge = lamplighter_orbit_gauge(2)
    ball, index, adj = graph_distances(gauge.identity, 6, gauge.neighbors)
    dist = bfs_matrix(adj, [index[gauge.identity]])[0]
    for g in ball:
        assert gauge.norm(g) == dist[index[g]]


def test_dl_vertex_gauge_small_balls():
    g = dl_vertex_gauge(2, 2)
    assert ball_volume(g, 0) == 1
    assert ball_volume(g, 1) == 5
    assert sphere_sizes(g, 2)[:2] == [1, 4]


lamp = st.lists(st.sampled_from(["t", "T", "d"]), max_size=20)


def lamp_word(seq, p=2):
    gens = {"t": LampElement.move(p, 1), "T": LampElement.move(p, -1), "d": LampElement.toggle(p, 1)}
    g = LampElement(p)
    for s in seq:
        g = g * gens[s]
    return g


@given(lamp, lamp)
def test_lamplighter_gauges_subadditive(a, b):
    g, h = lamp_word(a), lamp_word(b)
    for gauge in (lamplighter_word_gauge(2), lamplighter_orbit_gauge(2)):
        assert gauge.norm(g * h) <= gauge.norm(g) + gauge.norm(h)
        assert gauge.norm(g.inverse()) == gauge.norm(g)


@given(st.lists(st.sampled_from([1, -1, 2, -2]), max_size=20), st.lists(st.sampled_from([1, -1, 2, -2]), max_size=20))
def test_free_gauge_subadditive(a, b):
    gauge = free_word_gauge(2)
    g, h = FreeWord.from_letters(2, a), FreeWord.from_letters(2, b)
    assert gauge.norm(g * h) <= gauge.norm(g) + gauge.norm(h)


def test_subadditivity_checker_reports():
    gauge = lamplighter_orbit_gauge(2)
    assert check_subadditive(gauge, ball_pairs(gauge, 5, 500, seed=1)).passed
    assert check_subadditive(free_word_gauge(2), random_pairs(free_word_gauge(2), 300, seed=2)).passed
    squared = Gauge("squared", "test", ("free", 2), lambda w: len(w) ** 2, FreeWord(2),
                    neighbors=free_word_gauge(2).neighbors)
    rep = check_subadditive(squared, random_pairs(squared, 200, seed=3))
    assert not rep.passed and rep.violations > 0 and rep.worst_excess > 0
    assert rep.to_json()["violations"] == rep.violations


def test_growth_report_exact_exponential():
    rep = growth_report([3 ** r for r in range(13)])
    assert rep.rate == pytest.approx(math.log(3), rel=1e-12)
    assert rep.temperate
    assert all(v <= rep.envelope * math.exp(rep.rate * r) * (1 + 1e-12)
               for r, v in zip(rep.radii, [3 ** r for r in range(13)]))


def test_superexponential_growth_unstable_under_doubling():
    fast = Gauge("fast", "test", ("free", 2), len, FreeWord(2),
                 volume=lambda r: math.floor(math.exp(0.05 * r * r)) + 1)
    rep = temperance_estimate(fast, 30)
    assert not rep.stable_under_doubling
    assert rep.rate > 1.5 * rep.half_range_rate


def test_free_rate_approaches_log3():
    rep = temperance_estimate(free_word_gauge(2), 10)
    assert abs(rep.rate - math.log(3)) < 1e-3
    assert rep.temperate and rep.stable_under_doubling


def test_integer_gauge_subexponential():
    rep = temperance_estimate(integer_gauge(), 64)
    assert rep.rate < 0.05
    assert rep.temperate and rep.stable_under_doubling
    assert rep.to_csv().splitlines()[0] == "radius,count"


def test_ball_volume_translation_invariant():
    gauge = lamplighter_orbit_gauge(2)
    center = lamp_word(list("tdtTd"))
    assert ball_volumes(gauge, 4, center=center) == ball_volumes(gauge, 4)


def test_ball_volume_errors():
    with pytest.raises(ValueError):
        ball_volume(lamplighter_word_gauge(2), 3, method="formula")
    with pytest.raises(ValueError):
        ball_volume(free_word_gauge(2), 3, method="nope")
    assert ball_volume(free_word_gauge(2), -1) == 0


def test_enumerated_ball_is_bounded_by_budget():
    from poissonwalk.errors import BudgetExceededError
    with pytest.raises(BudgetExceededError):
        ball_volume(dl_vertex_gauge(2, 2), 12, method="enumerate", budget=100)
