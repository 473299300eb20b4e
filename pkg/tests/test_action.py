import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_field
from oracles import dwell_barrier, free_cost, ou_cost
from strongld.action import (
    DiscretePath,
    action_gradient,
    minimize_cost,
    quasipotential,
    rate_functional,
)
from strongld.integrate import TimeGrid, ode_solve
from strongld.polyfield import double_well_drift, linear_drift, zero_drift


def _fd_gradient(path, field, h=1e-6):
    g = np.zeros_like(path.knots)
    for k in range(path.knots.shape[0]):
        for i in range(path.knots.shape[1]):
            up, dn = path.knots.copy(), path.knots.copy()
            up[k, i] += h
            dn[k, i] -= h
            g[k, i] = (rate_functional(DiscretePath(path.grid, up), field)
                       - rate_functional(DiscretePath(path.grid, dn), field)) / (2 * h)
    return g


@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 3))
def test_gradient_matches_finite_differences(seed, d):
    rng = np.random.default_rng(seed)
    f = random_field(rng, d, degree=3)
    grid = TimeGrid(0, 1, 12)
    path = DiscretePath(grid, rng.uniform(-1, 1, (13, d)))
    g = action_gradient(path, f)
    fd = _fd_gradient(path, f)
    assert np.abs(g - fd).max() / max(1.0, np.abs(g).max()) < 1e-5


@given(seed=st.integers(0, 2**32 - 1))
def test_rate_is_non_negative(seed):
    rng = np.random.default_rng(seed)
    f = random_field(rng, 2)
    path = DiscretePath(TimeGrid(0, 1, 10), rng.uniform(-1, 1, (11, 2)))
    assert rate_functional(path, f) >= 0.0


def test_rate_vanishes_on_flow():
    f = double_well_drift(1, 1, 0, 0.3, 5)
    grid = TimeGrid(0, 2, 4000)
    tr = ode_solve(f, [0.2], grid)
    # midpoint rule is second order, so the residual of the RK4 path is O(dt^2)
    assert rate_functional(DiscretePath(grid, tr.states), f) < 1e-8


def test_straight_path():
    p = DiscretePath.straight([0.0, 1.0], [1.0, 1.0], TimeGrid(0, 1, 4))
    np.testing.assert_allclose(p.knots[:, 0], [0, 0.25, 0.5, 0.75, 1.0])
    assert np.all(p.knots[:, 1] == 1.0)
    with pytest.raises(ValueError):
        DiscretePath(TimeGrid(0, 1, 4), np.zeros((3, 1)))


@pytest.mark.parametrize("x,y,t", [([0.0], [1.0], 1.0), ([0.0, 0.0], [1.0, -2.0], 3.0)])
def test_zero_drift_cost(x, y, t):
    res = minimize_cost(x, y, t, zero_drift(len(x)), knots=64)
    ref = free_cost(x, y, t)
    assert res.converged
    assert abs(res.value - ref) / ref < 1e-4


@pytest.mark.parametrize("metric", ["hessian", "h1", "euclidean"])
def test_history_is_monotone(metric):
    f = double_well_drift(1, 1)
    res = minimize_cost([-1.0], [0.0], 5.0, f, knots=32, metric=metric, max_iter=300)
    h = np.array(res.history)
    assert np.all(np.diff(h) <= 0)


def test_metrics_agree_on_minimum():
    f = double_well_drift(1, 1)
    vals = [minimize_cost([-1.0], [0.0], 5.0, f, knots=32, metric=m, max_iter=20000).value
            for m in ("hessian", "h1")]
    assert abs(vals[0] - vals[1]) < 1e-6


def test_ou_cost_oracle():
    f = linear_drift([[-1.0]])
    for t in (0.5, 2.0):
        res = minimize_cost([0.0], [1.0], t, f, knots=200)
        ref = ou_cost(0.0, 1.0, t)
        assert abs(res.value - ref) / ref < 1e-4


def test_downhill_is_nearly_free():
    f = double_well_drift(1, 1)
    res = quasipotential([0.0], [-1.0], f, [5.0, 10.0, 20.0], knots=200)
    assert res.value < 1e-4


def test_dwell_quasipotential():
    f = double_well_drift(1, 1)
    res = quasipotential([-1.0], [0.0], f, [5.0, 10.0, 20.0, 40.0], knots=200)
    assert abs(res.value - dwell_barrier()) / dwell_barrier() < 0.05
    assert len(res.candidates) == 4 and res.best_t in (5.0, 10.0, 20.0, 40.0)
    vals = [v for _, v, _ in res.candidates]
    assert res.value == min(vals)


def test_refining_knots_does_not_raise_minimum_much():
    f = double_well_drift(1, 1)
    coarse = minimize_cost([-1.0], [0.0], 10.0, f, knots=100).value
    fine = minimize_cost([-1.0], [0.0], 10.0, f, knots=200).value
    assert fine <= coarse + 1e-3


def test_quasipotential_of_a_point_is_zero():
    res = quasipotential([0.3], [0.3], double_well_drift(1, 1), [1.0])
    assert res.value == 0.0 and res.path is None


def test_bad_arguments():
    f = zero_drift(1)
    with pytest.raises(ValueError):
        minimize_cost([0.0], [1.0], 0.0, f)
    with pytest.raises(ValueError):
        minimize_cost([0.0], [1.0], 1.0, f, knots=4)
    with pytest.raises(ValueError):
        minimize_cost([0.0], [1.0], 1.0, f, metric="sobolev")
    with pytest.raises(ValueError):
        quasipotential([0.0], [1.0], f, [])


def test_path_csv(tmp_path):
    res = minimize_cost([0.0], [1.0], 1.0, zero_drift(1), knots=8)
    out = tmp_path / "p.csv"
    res.path.to_csv(out, ["note"])
    lines = out.read_text().splitlines()
    assert lines[:2] == ["# note", "t,phi_1"] and len(lines) == 10
