import math

import numpy as np
import pytest

from oracles import folded_normal_mean, ou_variance
from strongld.integrate import TimeGrid, WienerPath, em_sde_solve, em_two_noise_solve
from strongld.mc import (
    CHUNK,
    SWEEP_COLUMNS,
    conditional_sweep,
    eps_sweep,
    expected_deviation,
    expected_deviation_conditional,
    geometric_ladder,
    path_seed,
)
from strongld.polyfield import PolyVectorField, cubic_drift, linear_drift, zero_drift

OU = linear_drift([[-1.0]])


def test_path_seed_is_stable_and_distinct():
    seeds = [path_seed(7, i) for i in range(100)]
    assert len(set(seeds)) == 100
    assert seeds == [path_seed(7, i) for i in range(100)]
    assert path_seed(7, 0) != path_seed(8, 0)
    assert 0 <= path_seed(2**64 - 1, 3) < 2**64


def test_paths_match_single_solver():
    f = cubic_drift(1, 1, 0.3, 5)
    g = TimeGrid(0, 1, 100)
    est = expected_deviation(f, 0.01, [0.1], 1.0, g, 3, master_seed=9, x0=[0.0])
    ref = [abs(em_sde_solve(f, 0.01, [0.0], g, seed=path_seed(9, i)).final[0] - 0.1) for i in range(3)]
    assert est.mean == pytest.approx(np.mean(ref), rel=1e-14)
    # an interior probe uses the same path prefixes
    est_half = expected_deviation(f, 0.01, [0.1], 0.5, g, 3, master_seed=9, x0=[0.0])
    ref_half = [abs(em_sde_solve(f, 0.01, [0.0], g, seed=path_seed(9, i)).at(0.5)[0] - 0.1) for i in range(3)]
    assert est_half.mean == pytest.approx(np.mean(ref_half), rel=1e-14)


def test_ou_folded_normal():
    eps = 0.04
    g = TimeGrid(0, 1, 1000)
    est = expected_deviation(OU, eps, [0.0], 1.0, g, 10_000, master_seed=1, x0=[0.0])
    ref = folded_normal_mean(math.sqrt(ou_variance(eps, 1.0)))
    assert abs(est.mean - ref) < 3 * est.stderr
    assert est.n_diverged == 0


def test_zero_noise_rung_is_exact():
    f = cubic_drift(1, 1, 0.3, 5)
    g = TimeGrid(0, 2, 200)
    est = expected_deviation(f, 0.0, [0.05], 2.0, g, 500, master_seed=1, x0=[0.0])
    det = em_sde_solve(f, 0.0, [0.0], g).final[0]
    assert est.stderr == 0.0
    assert est.mean == abs(det - 0.05)


def test_result_independent_of_workers():
    g = TimeGrid(0, 1, 50)
    f = cubic_drift(1, 1, 0.3, 5)
    n = 3 * CHUNK + 17
    a = expected_deviation(f, 0.05, [0.0], 1.0, g, n, 123, [0.0], n_workers=1)
    b = expected_deviation(f, 0.05, [0.0], 1.0, g, n, 123, [0.0], n_workers=4)
    assert a == b


def test_stderr_shrinks_with_paths():
    g = TimeGrid(0, 1, 100)
    a = expected_deviation(OU, 0.04, [0.0], 1.0, g, 1000, 3, [0.0])
    b = expected_deviation(OU, 0.04, [0.0], 1.0, g, 4000, 3, [0.0])
    assert 1.6 <= a.stderr / b.stderr <= 2.5


def test_divergence_counted_and_monotone():
    # x' = x^2 escapes from above the unstable point
    f = PolyVectorField(1, [{(2,): 1.0}])
    g = TimeGrid(0, 3, 600)
    counts = [expected_deviation(f, 0.5, [0.0], t, g, 400, 5, [0.5]).n_diverged for t in (1.0, 2.0, 3.0)]
    assert counts[-1] > 0
    assert counts == sorted(counts)


def test_free_motion_deviation():
    # zero drift: X_t = x0 + sqrt(eps) W_t exactly under Euler
    g = TimeGrid(0, 1, 10)
    est = expected_deviation(zero_drift(1), 0.09, [0.0], 1.0, g, 20_000, 4, [0.0])
    assert abs(est.mean - folded_normal_mean(0.3)) < 3 * est.stderr


def test_linear_sweep_satisfies_bound():
    M = [[-1.0, 0.5], [0.0, -0.5]]
    f = linear_drift(M)
    g = TimeGrid(0, 1, 100)
    rep = eps_sweep(f, [0.3, -0.2], 1.0, g, [1e-2, 1e-4, 1e-6, 0.0], 200, 11, [1.0, 0.5])
    assert rep.bound_satisfied and not rep.failed
    # the noiseless rung reproduces the Euler flow, so the minimum equals the bound up to O(dt)
    assert rep.ladder[-1].stderr == 0.0
    assert abs(rep.min_mean - rep.bound) < 1e-2
    rows = rep.rows()
    assert len(rows) == 4 and all(len(r) == len(SWEEP_COLUMNS) for r in rows)
    assert rows[0][-1] == "true"


def test_cubic_sweep_table_is_complete(tmp_path):
    f = cubic_drift(1, 1, 0.3, 5)
    g = TimeGrid(0, 2, 200)
    rep = eps_sweep(f, [0.1], 2.0, g, geometric_ladder(1e-1, 1e-3), 100, 2, [0.0])
    assert [e.epsilon for e in rep.ladder] == pytest.approx([1e-1, 1e-2, 1e-3])
    out = tmp_path / "sweep.csv"
    rep.to_csv(out, ["seed=2"])
    lines = out.read_text().splitlines()
    assert lines[1] == ",".join(SWEEP_COLUMNS)
    assert len(lines) == 5


def test_ladder_validation():
    g = TimeGrid(0, 1, 10)
    for bad in ([], [1e-2, 1e-1], [1e-2, 1e-2], [1e-2, -1e-3]):
        with pytest.raises(ValueError):
            eps_sweep(OU, [0.0], 1.0, g, bad, 10, 1, [0.0])
    assert geometric_ladder() == pytest.approx([1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6])


def test_argument_checks():
    g = TimeGrid(0, 1, 10)
    with pytest.raises(ValueError):
        expected_deviation(OU, -1.0, [0.0], 1.0, g, 10, 1, [0.0])
    with pytest.raises(ValueError):
        expected_deviation(OU, 0.1, [0.0], 1.0, g, 1, 1, [0.0])


def test_conditional_matches_two_noise_solver():
    f = cubic_drift(1, 1, 0.3, 5)
    g = TimeGrid(0, 1, 100)
    w = WienerPath.generate(g, 1, seed=52)
    est = expected_deviation_conditional(f, 1e-3, w, 1e-2, [0.1], 1.0, g, 3, 6, [0.0])
    ref = [abs(em_two_noise_solve(f, 1e-3, w, 1e-2, [0.0], g, seed=path_seed(6, i)).final[0] - 0.1)
           for i in range(3)]
    assert est.mean == pytest.approx(np.mean(ref), rel=1e-14)


def test_conditional_zero_drift_cancels_recorded_noise():
    # with b = 0 and lam = x0 + sqrt(D) W_t the recorded part cancels exactly
    g = TimeGrid(0, 1, 50)
    w = WienerPath.generate(g, 1, seed=3)
    D = 0.04
    lam = [0.2 * w.values[-1, 0]]
    est = expected_deviation_conditional(zero_drift(1), D, w, 0.0, lam, 1.0, g, 10, 1, [0.0])
    assert est.mean < 1e-14 and est.stderr == 0.0
    rep = conditional_sweep(zero_drift(1), D, w, lam, 1.0, g, [1e-2, 1e-4], 4000, 1, [0.0], bound=0.0)
    assert rep.ladder[0].mean == pytest.approx(folded_normal_mean(0.1), rel=0.05)
    assert rep.ladder[1].mean < rep.ladder[0].mean
