"""Acceptance suite: one test per criterion, each printing a single verdict line."""
import math
import time

import numpy as np
import pytest

from oracles import bfs_matrix, graph_distances
from poissonwalk.cli import gallery_dir, main
from poissonwalk.criteria import (RayMap, StripSpec, entropy_criterion_check, escape_rate,
                                  ray_tracking_statistic, strip_statistic)
from poissonwalk.densities import DensityGrid, convolution_entropy_sequence
from poissonwalk.entropy import FakeDriftOracle, FreeSRWOracle, TrivialOracle, ergodic_rn_trace, \
    furstenberg_entropy_estimate
from poissonwalk.gauges import free_word_gauge, integer_gauge, temperance_estimate
from poissonwalk.groups import (DLVertex, FreeWord, TreeVertex, dl_distance, dl_walk, point_mass,
                                simulate_walk, srw_free, srw_z, switch_walk, tree_distance, vertical_drift)
from poissonwalk.groups.engine import digit_engine, step_indices
from poissonwalk.stopping import (MeasureSplit, StoppingTimeSpec, bounded_density_transform,
                                  entropy_scaling_check, expected_tau_identity_check,
                                  first_moment_bound_check, induced_measure, theta_chisquare)

LOG3 = math.log(3)
A = FreeWord.generator(2, 1)


@pytest.fixture
def verdict(capsys):
    """Print one ``[PASS]``/``[FAIL]`` line for a criterion, then assert it."""
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}")
        assert ok, detail
    return emit


def test_01_uniform_entropies(verdict):
    start = time.perf_counter()
    h = convolution_entropy_sequence(DensityGrid.uniform(0, 1, 2 ** 12), 2)
    elapsed = time.perf_counter() - start
    ok = abs(h[0]) <= 1e-3 and abs(h[1] - 0.5) <= 1e-3 and elapsed < 5
    verdict(1, "uniform H1, H2", ok, f"H1={h[0]:.2e} H2={h[1]:.6f} (tol 1e-3) in {elapsed:.2f}s (< 5s)")


def test_02_entropy_not_subadditive(verdict):
    h = convolution_entropy_sequence(DensityGrid.uniform(0, 1, 2 ** 12), 2)
    verdict(2, "H2 > 2 H1 + 0.49", h[1] > 2 * h[0] + 0.49, f"H2={h[1]:.6f} 2H1+0.49={2 * h[0] + 0.49:.6f}")


def test_03_bounded_transform_entropy_positive(verdict):
    start = time.perf_counter()
    tr = bounded_density_transform(DensityGrid.uniform(0, 1, 2 ** 12), region=(0.0, 0.5))
    elapsed = time.perf_counter() - start
    ok = tr.entropy > 0 and tr.sup <= tr.sup_bound * (1 + 1e-9) and elapsed < 30
    verdict(3, "theta from the U(0,1/2) split", ok,
            f"H(theta)={tr.entropy:.6f} (> 0), sup={tr.sup:.4f} <= {tr.sup_bound:.4f}, {elapsed:.2f}s (< 30s)")


def test_04_furstenberg_entropy_f2(verdict):
    start = time.perf_counter()
    oracle = FreeSRWOracle(2)
    rep = furstenberg_entropy_estimate(srw_free(2), oracle, 10_000, 1000, seed=4)
    erg = ergodic_rn_trace(srw_free(2), oracle, 10_000, 1000, seed=4)
    elapsed = time.perf_counter() - start
    ref = 0.5 * LOG3
    rel = abs(rep.estimate - ref) / ref
    joint = math.hypot(rep.stderr, erg.stderr)
    agree = abs(rep.estimate - erg.estimate) <= 3 * joint
    ok = rel <= 0.02 and agree and elapsed < 60
    verdict(4, "Furstenberg entropy on F2", ok,
            f"h={rep.estimate:.5f}±{rep.stderr:.5f} vs {ref:.5f} rel {rel:.2%} (<= 2%); ergodic "
            f"{erg.estimate:.5f}±{erg.stderr:.5f} within 3 joint stderr={agree}; {elapsed:.1f}s (< 60s)")


def test_05_stopping_identities_f2(verdict):
    spec = StoppingTimeSpec.members([A])
    tau = expected_tau_identity_check(srw_free(2), spec, 100_000, seed=5)
    fm = first_moment_bound_check(srw_free(2), spec, 100_000, seed=5)
    ent = entropy_scaling_check(srw_free(2), spec, FreeSRWOracle(2), 2000, 1000, seed=5)
    tau_ok = abs(tau.value - 4.0) <= 0.04
    ent_ok = abs(ent.value - 4 * 0.5 * LOG3) <= 0.05 * 2 * LOG3
    ok = tau_ok and ent_ok and fm.passed
    verdict(5, "stopping identities on F2, L={a}", ok,
            f"E(tau)={tau.value:.4f} in [3.96, 4.04]; h_theta={ent.value:.4f} vs 4h_mu={2 * LOG3:.4f} "
            f"(tol {0.05 * 2 * LOG3:.4f}); L(theta)={fm.value:.4f} <= {fm.reference:.4f}+2*{fm.stderr:.4f}")


def test_06_theta_series_chisquare_z(verdict):
    up = FreeWord.generator(1, 1)
    spec = StoppingTimeSpec.members([up])
    deficit = induced_measure(MeasureSplit.from_spec(srw_z(), spec), eps=1e-12).deficit
    chi = theta_chisquare(srw_z(), spec, 100_000, seed=6)
    p = chi.value
    ok = chi.passed and p > 0.01 and deficit < 1e-9 and chi.extra["deficit"] < 1e-9
    verdict(6, "theta series vs x_tau on Z", ok, f"chi-square p={p:.4f} (> 0.01), deficit={deficit:.2e} (< 1e-9)")


def test_07_geometry_oracles(verdict):
    root = TreeVertex.root(2)
    ball, _, adj = graph_distances(root, 5, lambda v: v.neighbors())
    d = bfs_matrix(adj, list(range(len(ball))))
    tree_bad = sum(tree_distance(u, v) != d[i, j] for i, u in enumerate(ball) for j, v in enumerate(ball))
    # all pairs in the radius-6 DL ball; their geodesics stay within radius 12
    base = DLVertex.base(2, 2)
    inner, _, _ = graph_distances(base, 6, lambda v: v.neighbors())
    big, index, adj = graph_distances(base, 12, lambda v: v.neighbors())
    d = bfs_matrix(adj, [index[v] for v in inner])
    cols = np.array([index[v] for v in inner])
    dl_bad = sum(int(dl_distance(u, v) != d[a, cols[b]]) for a, u in enumerate(inner)
                 for b, v in enumerate(inner))
    # 10^6 generator moves: 1000 paths of 1000 steps through the vectorised engine
    dist = dl_walk(2, 2, 0.5)
    idx = step_indices(dist, 7, 0, 1000, 1000)
    incr = np.array([g.step for g in dist.elements])[idx]
    expected = np.cumsum(incr, axis=1)
    mismatches = []
    digit_engine(dist).run(idx, observer=lambda t, st: mismatches.append(
        int(np.count_nonzero(st.height != expected[:, t - 1]))))
    engine_bad = sum(mismatches)
    # object-level walks rebuild every vertex, which re-checks h_left + h_right = 0
    for i in range(3):
        for k, v in enumerate(simulate_walk(dist, 1000, 7, i).positions):
            engine_bad += int(v.left.height + v.right.height != 0)
            engine_bad += int(k and v.height != expected[i, k - 1])
    ok = tree_bad == 0 and dl_bad == 0 and engine_bad == 0 and len(mismatches) == 1000
    verdict(7, "exact geometry oracles", ok,
            f"T3 radius 5: {len(ball)}^2 pairs, {tree_bad} mismatches; DL2,2 radius 6: {len(inner)}^2 pairs, "
            f"{dl_bad} mismatches; 10^6 moves: {engine_bad} height violations")


def test_08_drift(verdict):
    est = escape_rate(srw_free(2), 1000, 10_000, seed=8)
    free_ok = abs(est.value - 0.5) <= 0.005
    dist = switch_walk(2, 0.7)
    exact = vertical_drift(dist)
    n, paths = 500, 4000
    st = digit_engine(dist).run(step_indices(dist, 8, 0, paths, n))
    rates = st.height / n
    m, se = rates.mean(), rates.std(ddof=1) / math.sqrt(paths)
    lamp_ok = exact.exact and abs(m - exact.value) <= 3 * se
    verdict(8, "drift", free_ok and lamp_ok,
            f"F2 |x_n|/n={est.value:.5f} (0.5 within 1%); lamplighter height rate {m:.5f}±{se:.5f} "
            f"vs exact {exact.value:.5f} (3 stderr)")


def test_09_ray_tracking(verdict):
    times = [100, 1000, 10_000]
    lines, ok = [], True
    for name, dist, paths in (("F2", srw_free(2), 400), ("DL2,2", dl_walk(2, 2, 0.7), 200)):
        rep = ray_tracking_statistic(dist, None, paths, 10_000, seed=9, checkpoints=times)
        vals = [rep.at(t) for t in times]
        good = vals[0] > vals[1] > vals[2] and vals[1] < 0.1
        ok &= good
        lines.append(f"{name} " + " > ".join(f"{v:.4f}" for v in vals))
    control = ray_tracking_statistic(point_mass(A), RayMap(("free", 2), 1.0), 5, 10_000, seed=9)
    ctl_ok = all(v == 0.0 for v in control.max)
    verdict(9, "ray tracking", ok and ctl_ok, "; ".join(lines) + f"; geodesic control max={max(control.max)}")


def test_10_entropy_increments(verdict):
    n_max = 30
    gauss = convolution_entropy_sequence(DensityGrid.gaussian(0, 1, cells_per_unit=64), n_max)
    unif = convolution_entropy_sequence(DensityGrid.uniform(0, 1, 256), n_max)
    mono = all(np.all(np.diff(np.diff(h)) <= 1e-9) for h in (gauss, unif))
    n = np.arange(2, n_max + 1)
    err = np.max(np.abs(np.diff(gauss) - 0.5 * np.log(n / (n - 1))))
    verdict(10, "entropy increments to n=30", mono and err <= 1e-2,
            f"increments nonincreasing={mono}; Gaussian max |dH - log(n/(n-1))/2|={err:.2e} (<= 1e-2)")


def test_11_entropy_criterion(verdict):
    ok = entropy_criterion_check(srw_z(), TrivialOracle(), 16, 2000, seed=11)
    bad = entropy_criterion_check(srw_z(), FakeDriftOracle(0.3), 16, 2000, seed=11)
    good = ok.passed and ok.running_min[-1] < 0.2 and not bad.passed and bad.running_min[-1] >= 0.2
    verdict(11, "entropy criterion", good,
            f"trivial derivative min={ok.running_min[-1]:.4f} (< 0.2) {'PASS' if ok.passed else 'FAIL'}; "
            f"injected drift min={bad.running_min[-1]:.4f} (>= 0.2) {'PASS' if bad.passed else 'FAIL'}")


def test_12_strips(verdict):
    rep = strip_statistic(srw_free(2), StripSpec(2, 2), 1000, 1000, seed=12)
    flat = strip_statistic(srw_free(2), StripSpec(2, 0), 1000, 1000, seed=12)
    n = np.asarray(flat.times, dtype=float)
    slack = float(np.max(np.asarray(flat.trace) - np.log(2 * n + 1) / n))
    empty = strip_statistic(srw_free(2), StripSpec(2, 2, kind="empty"), 1000, 1000, seed=12)
    ok = rep.p_hat > 0 and slack <= 0.02 and not empty.passed
    verdict(12, "strips on F2", ok,
            f"p_hat={rep.p_hat:.4f}±{rep.p_hat_stderr:.4f} (> 0); width-0 max excess over log(2n+1)/n="
            f"{slack:.4f} (<= 0.02); empty strip {'PASS' if empty.passed else 'FAIL'} (must FAIL)")


def test_13_temperance(verdict):
    start = time.perf_counter()
    f2 = temperance_estimate(free_word_gauge(2), 12)
    z = temperance_estimate(integer_gauge(), 64)
    elapsed = time.perf_counter() - start
    ok = abs(f2.rate - LOG3) <= 1e-2 and z.rate < 0.05 and elapsed < 10
    verdict(13, "temperance", ok,
            f"F2 rate={f2.rate:.5f} vs log 3={LOG3:.5f} (1e-2); Z rate={z.rate:.4f} (< 0.05); {elapsed:.2f}s (< 10s)")


def test_14_gallery_reproducible(verdict, tmp_path):
    names = sorted(p.stem for p in gallery_dir().glob("*.json"))
    outputs = []
    for label, threads in (("a", 1), ("b", 3)):
        out = tmp_path / label
        for name in names:
            assert main(["run", name, "--out", str(out), "--threads", str(threads)]) == 0
        outputs.append({p.name: p.read_bytes() for p in out.glob("*.json") if not p.name.endswith(".timing.json")})
    same = [n for n in names if outputs[0][f"{n}.json"] == outputs[1][f"{n}.json"]]
    ok = len(same) == len(names) and outputs[0] == outputs[1]
    verdict(14, "gallery reproducibility", ok,
            f"{len(same)}/{len(names)} reports byte-identical across two runs (1 and 3 threads)")
