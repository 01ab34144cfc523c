import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poissonwalk.densities import DensityGrid
from poissonwalk.entropy import FreeSRWOracle
from poissonwalk.errors import NoTriggerError
from poissonwalk.groups import FreeWord, simulate_walk, srw_free, srw_z
from poissonwalk.stopping import (MeasureSplit, StoppingTimeSpec, bounded_density_transform,
                                  default_threshold, entropy_scaling_check, expected_tau_identity_check,
                                  first_moment_bound_check, induced_measure, sample_stopped, sample_tau,
                                  stopped_path, stopping_times, theta_chisquare, truncation_order)

A, A_INV = FreeWord.generator(2, 1), FreeWord.generator(2, -1)


def test_z_theta_is_geometric():
    up = FreeWord.generator(1, 1)
    ind = induced_measure(MeasureSplit.from_spec(srw_z(), StoppingTimeSpec.members([up])), eps=1e-12)
    assert ind.deficit < 1e-11
    for n in range(0, 30):
        x = FreeWord.power(1, 1, 1 - n)
        assert ind.theta.prob(x) == pytest.approx(0.5 ** (n + 1), abs=1e-16)


def test_f2_theta_atom_closed_form():
    # x_tau = b^j a^(+-1); the j = 0 atom sums central binomial terms: 1 / (2 sqrt 3) per sign
    spec = StoppingTimeSpec.members([A, A_INV])
    ind = induced_measure(MeasureSplit.from_spec(srw_free(2), spec), eps=1e-14)
    assert ind.theta.prob(A) == pytest.approx(0.5 / math.sqrt(3), abs=1e-12)
    assert ind.theta.prob(A_INV) == pytest.approx(0.5 / math.sqrt(3), abs=1e-12)
    assert all(g.letters[-1] in (1, -1) for g, _ in ind.theta.items())


@given(st.floats(0.01, 0.99), st.floats(1e-14, 1e-2))
def test_truncation_order_reaches_eps(beta, eps):
    n = truncation_order(beta, eps)
    assert beta ** (n + 1) <= eps * (1 + 1e-9)
    assert n == 0 or beta ** n > eps * (1 - 1e-9)


def test_truncation_order_edge_cases():
    assert truncation_order(0.0, 1e-12) == 0
    with pytest.raises(ValueError):
        truncation_order(1.0, 1e-12)


def test_expected_tau_and_first_moment():
    spec = StoppingTimeSpec.members([A])
    chk = expected_tau_identity_check(srw_free(2), spec, 40_000, seed=1)
    assert chk.reference == 4.0
    assert abs(chk.value - 4.0) < 4 * chk.stderr
    fm = first_moment_bound_check(srw_free(2), spec, 5_000, seed=2)
    assert fm.passed and fm.extra["L_mu"] == 1.0


def test_sample_tau_is_geometric():
    taus = sample_tau(srw_free(2), StoppingTimeSpec.members([A]), 20_000, seed=3)
    assert taus.min() >= 1
    assert np.mean(taus == 1) == pytest.approx(0.25, abs=0.015)
    pos, t2 = sample_stopped(srw_free(2), StoppingTimeSpec.members([A]), 100, seed=3)
    assert len(pos) == 100 and t2.min() >= 1


def test_theta_chisquare_f2():
    res = theta_chisquare(srw_free(2), StoppingTimeSpec.members([A, A_INV]), 20_000, seed=4)
    assert res.passed and res.extra["deficit"] < 1e-11


def test_no_trigger():
    spec = StoppingTimeSpec.members([FreeWord.generator(2, 2) * A])
    with pytest.raises(NoTriggerError):
        MeasureSplit.from_spec(srw_free(2), spec)
    with pytest.raises(NoTriggerError):
        sample_tau(srw_free(2), spec, 10, seed=0)


def test_stopping_times_on_path():
    path = simulate_walk(srw_free(2), 200, seed=9)
    spec = StoppingTimeSpec.members([A])
    taus = stopping_times(path, spec)
    assert all(path.increments[t - 1] == A for t in taus)
    assert stopped_path(path, spec)[0] == path.positions[taus[0]]


# ------------------------------------------------------------ densities

grids = st.lists(st.floats(0.0, 5.0), min_size=4, max_size=30).filter(lambda v: sum(v) > 0.1)


@given(grids)
def test_bounded_transform_properties(v):
    w = 0.25
    mu = DensityGrid(0.0, w, np.array(v) / (sum(v) * w))
    res = bounded_density_transform(mu, eps=1e-10)
    assert res.sup <= res.sup_bound * (1 + 1e-9)
    assert res.theta.mass() == pytest.approx(1.0 - res.deficit, abs=1e-12)
    assert res.deficit <= 1e-10 * 1.01
    # Wald: E x_tau = E tau * E x_1
    mean = lambda d: float((d.centers * d.values).sum() * d.width)
    assert mean(res.theta) / res.theta.mass() == pytest.approx(mean(mu) / res.alpha_mass, rel=1e-6, abs=1e-9)


def test_uniform_region_transform():
    mu = DensityGrid.uniform(0, 1, 2 ** 8)
    res = bounded_density_transform(mu, region=(0.0, 0.5))
    assert res.threshold == pytest.approx(1.0)
    assert res.sup_bound == pytest.approx(2.0)
    assert res.sup <= res.sup_bound
    assert res.alpha_mass == pytest.approx(0.5)


def test_default_threshold_halves_mass():
    mu = DensityGrid.gaussian(0, 1, cells_per_unit=64)
    j = default_threshold(mu)
    assert mu.values[mu.values <= j].sum() * mu.width >= 0.5


def test_entropy_scaling_f2():
    res = entropy_scaling_check(srw_free(2), StoppingTimeSpec.members([A]), FreeSRWOracle(2),
                                paths=400, horizon=400, seed=5)
    assert res.extra["expected_tau"] == 4.0
    assert res.residual < 5 * res.extra["joint_stderr"] + 0.05 * res.reference
