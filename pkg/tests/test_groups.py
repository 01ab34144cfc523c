import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import bfs_matrix, graph_distances, reduce_letters
from poissonwalk.errors import FamilyMismatchError, IncompatibleActionError
from poissonwalk.groups import (AffineElement, DLMove, DLVertex, FreeWord, LampElement, SolElement,
                                TreeVertex, act, busemann, compose, confluence_height, dl_distance,
                                from_dl, inverse, to_dl, tree_distance, word_length)
from poissonwalk.groups.affine import hyperbolic_distance
from poissonwalk.groups.core import orbit_norm
from poissonwalk.groups.trees import bfs_ball, projection_to_ray

letters2 = st.lists(st.sampled_from([1, -1, 2, -2]), max_size=25)


def word(letters):
    return FreeWord.from_letters(2, letters)


# ------------------------------------------------------------- free groups

@given(letters2)
def test_free_reduction_matches_stack_oracle(xs):
    assert word(xs).letters == reduce_letters(xs)


@given(letters2, letters2, letters2)
def test_free_associativity(a, b, c):
    x, y, z = word(a), word(b), word(c)
    assert (x * y) * z == x * (y * z)


@given(letters2)
def test_free_inverse(a):
    x = word(a)
    assert x * x.inverse() == FreeWord(2)
    assert x.inverse() * x == FreeWord(2)
    assert inverse(x) == x.inverse()


def test_free_parse_and_print():
    w = FreeWord.parse(2, "abA")
    assert w.letters == (1, 2, -1)
    assert FreeWord.parse(2, str(w)) == w
    assert FreeWord.parse(2, "b^-1") == FreeWord.generator(2, -2)
    assert FreeWord.parse(2, "e") == FreeWord(2)
    with pytest.raises(ValueError):
        FreeWord.parse(2, "c")


def test_free_family_mismatch():
    with pytest.raises(FamilyMismatchError):
        compose(FreeWord.generator(2, 1), FreeWord.generator(3, 1))


# ------------------------------------------------------------------- trees

def test_tree_distance_matches_bfs_radius5():
    root = TreeVertex.root(2)
    ball, index, adj = graph_distances(root, 5, lambda v: v.neighbors())
    assert len(ball) == 1 + 3 * (2 ** 5 - 1)
    dist = bfs_matrix(adj, list(range(len(ball))))
    for i, u in enumerate(ball):
        for j, v in enumerate(ball):
            assert tree_distance(u, v) == dist[i, j]


def test_busemann_and_ray():
    v = TreeVertex(3, 2, (1, 2))
    assert busemann(v) == 2
    assert v.parent().parent() == TreeVertex.root(3)
    assert projection_to_ray(v) == TreeVertex.root(3)
    u = TreeVertex(3, 1, (0,))
    assert confluence_height(u, TreeVertex(3, 1, (1,))) == 0
    assert TreeVertex(3, -2, ()).ancestor(-5) == TreeVertex.ray(3, -5)


def test_tree_digits_range():
    TreeVertex(3, 1, (2,))
    with pytest.raises(ValueError):
        TreeVertex(3, 1, (3,))


# --------------------------------------------------------------- DL graphs

def test_dl_distance_matches_bfs_radius4():
    base = DLVertex.base(2, 2)
    inner = list(bfs_ball(base, 4, lambda v: v.neighbors()))
    big, index, adj = graph_distances(base, 8, lambda v: v.neighbors())
    rows = [index[v] for v in inner]
    dist = bfs_matrix(adj, rows)
    for a, u in enumerate(inner):
        for v in inner:
            assert dl_distance(u, v) == dist[a, index[v]]


def test_dl_radius_one_ball():
    assert len(bfs_ball(DLVertex.base(2, 2), 1, lambda v: v.neighbors())) == 5
    assert len(bfs_ball(DLVertex.base(2, 3), 1, lambda v: v.neighbors())) == 6


def test_dl_height_constraint_over_random_moves():
    rng = np.random.default_rng(0)
    p, q = 2, 3
    v = DLVertex.base(p, q)
    h = 0
    for s, d in zip(rng.integers(0, 2, size=20_000).tolist(), rng.integers(0, 6, size=20_000).tolist()):
        v = (DLMove(p, q, 1, d % p) if s else DLMove(p, q, -1, d % q)).apply(v)
        h += 1 if s else -1
        assert v.left.height + v.right.height == 0
        assert v.height == h
    assert dl_distance(DLVertex.base(p, q), v) >= abs(h)


def test_dl_constraint_rejected():
    with pytest.raises(ValueError):
        DLVertex(TreeVertex.root(2), TreeVertex(2, 1, (0,)))


# -------------------------------------------------------------- lamplighter

lamp_steps = st.lists(st.sampled_from(["t", "T", "d", "D"]), max_size=30)


def lamp_word(seq, p=3):
    g = LampElement(p)
    gens = {"t": LampElement.move(p, 1), "T": LampElement.move(p, -1),
            "d": LampElement.toggle(p, 1), "D": LampElement.toggle(p, p - 1)}
    for s in seq:
        g = g * gens[s]
    return g


@given(lamp_steps, lamp_steps, lamp_steps)
def test_lamplighter_associativity(a, b, c):
    x, y, z = lamp_word(a), lamp_word(b), lamp_word(c)
    assert (x * y) * z == x * (y * z)


@given(lamp_steps)
def test_lamplighter_inverse_and_dl_roundtrip(a):
    x = lamp_word(a)
    assert x * x.inverse() == LampElement(3)
    assert from_dl(to_dl(x)) == x


def test_lamplighter_word_length_matches_bfs():
    p = 2
    gens = [LampElement.move(p, 1), LampElement.move(p, -1), LampElement.toggle(p, 1)]
    ball = bfs_ball(LampElement(p), 7, lambda g: [g * s for s in gens])
    for g, d in ball.items():
        assert word_length(g) == d


def test_lamplighter_acts_on_dl_by_isometries():
    rng = np.random.default_rng(1)
    for _ in range(200):
        g, x, y = (lamp_word(rng.choice(list("tTdD"), size=8).tolist(), p=2) for _ in range(3))
        u, v = to_dl(x), to_dl(y)
        assert dl_distance(act(g, u), act(g, v)) == dl_distance(u, v)


# ------------------------------------------------------------- Aff(R), Sol

def test_affine_examples():
    g = AffineElement.from_ab(2.0, 1.0)
    h = AffineElement.from_ab(0.5, -3.0)
    assert math.isclose(g(3.0), 7.0)
    assert math.isclose((g * h)(1.0), g(h(1.0)))
    assert (g * g.inverse()).isclose(AffineElement())
    z = act(g, 1j)
    assert z == complex(1.0, 2.0)
    assert math.isclose(orbit_norm(g), hyperbolic_distance(1j, z))


@given(st.floats(-3, 3), st.floats(-5, 5), st.floats(-3, 3), st.floats(-5, 5), st.floats(-3, 3),
       st.floats(-5, 5))
def test_affine_associativity(la, b1, lb, b2, lc, b3):
    x, y, z = AffineElement(la, b1), AffineElement(lb, b2), AffineElement(lc, b3)
    assert ((x * y) * z).isclose(x * (y * z), rtol=1e-9)


def test_sol_matrix_product():
    g = SolElement(1.0, 2.0, 0.3, -1.2, 0.7)
    h = SolElement(1.0, 2.0, -0.5, 0.4, -1.1)
    assert np.allclose((g * h).matrix(), g.matrix() @ h.matrix())
    assert (g * g.inverse()).isclose(SolElement(1.0, 2.0))
    with pytest.raises(FamilyMismatchError):
        g * SolElement(1.0, 1.0)


def test_act_rejects_foreign_points():
    with pytest.raises(IncompatibleActionError):
        act(FreeWord.generator(2, 1), DLVertex.base(2, 2))
