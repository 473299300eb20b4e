"""
Monte Carlo estimates of the expected deviation ``M |X_t - lambda|`` and
noise-ladder sweeps against the linear master bound.

Every path ``i`` gets its own 64-bit seed from :func:`path_seed`, so a path's
noise does not depend on how many paths run or how they are split across
workers. Paths are simulated in fixed-size chunks, gathered into one array
in path-index order and reduced sequentially, which makes results
bit-identical for any worker count.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
import math

import numpy as np

from .errors import DimensionError, EstimationError, GridMismatchError
from .integrate import _as_state, euler_maruyama_paths, format_float, two_noise_shocks
from .master import residual_generic

__all__ = [
    "DeviationEstimate",
    "SweepReport",
    "path_seed",
    "expected_deviation",
    "expected_deviation_conditional",
    "eps_sweep",
    "geometric_ladder",
    "conditional_sweep",
    "CHUNK",
]

CHUNK = 256
SWEEP_COLUMNS = ["epsilon", "mean", "stderr", "n_paths", "n_diverged", "bound", "bound_satisfied"]


@dataclass(frozen=True)
class DeviationEstimate:
    epsilon: float
    t: float
    mean: float
    stderr: float
    n_paths: int
    n_diverged: int

    @property
    def n_valid(self):
        return self.n_paths - self.n_diverged


@dataclass
class SweepReport:
    """Expected deviations over a decreasing noise ladder, compared with ``bound``.

    ``min_mean`` is the smallest rung mean, a finite stand-in for the
    liminf as the noise vanishes. ``bound_satisfied`` holds when
    ``min_mean <= bound + 3 * stderr`` at the minimizing rung and no rung failed.
    """

    ladder: list
    bound: float
    min_mean: float
    bound_satisfied: bool
    lam: np.ndarray = None
    t: float = None
    failed: list = dc_field(default_factory=list)

    @property
    def argmin(self):
        means = [e.mean for e in self.ladder]
        finite = [i for i, m in enumerate(means) if np.isfinite(m)]
        return min(finite, key=lambda i: means[i]) if finite else None

    def rows(self):
        """Table rows (list of str) in the sweep CSV column order."""
        out = []
        for e in self.ladder:
            out.append([
                format_float(e.epsilon), format_float(e.mean), format_float(e.stderr),
                str(e.n_paths), str(e.n_diverged), format_float(self.bound),
                "true" if self.bound_satisfied else "false",
            ])
        return out

    def to_csv(self, path, header_lines=()):
        lines = [f"# {h}" for h in header_lines]
        lines.append(",".join(SWEEP_COLUMNS))
        lines.extend(",".join(r) for r in self.rows())
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def path_seed(master_seed, index):
    """64-bit seed of path ``index``, mixed from ``(master_seed, index)`` by :class:`numpy.random.SeedSequence`."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def geometric_ladder(start=1e-1, stop=1e-6, ratio=10.0):
    """Decreasing ``start, start/ratio, ...`` down to ``stop`` inclusive."""
    n = int(round(math.log(start / stop) / math.log(ratio))) + 1
    return [start / ratio ** i for i in range(n)]


def _reduce(values, eps, t, n_paths):
    """Mean and standard error over finite values, in path-index order."""
    ok = np.isfinite(values)
    n_div = int(n_paths - ok.sum())
    if n_div == n_paths:
        raise EstimationError(f"all {n_paths} paths diverged at eps={eps}, t={t}")
    v = values[ok]
    n = v.size
    # shifting by the first value keeps identical samples exact
    ref = v[0]
    dev = v - ref
    mean = float(ref + np.sum(dev) / n)
    if n > 1:
        var = float(np.sum((dev - np.sum(dev) / n) ** 2) / (n - 1))
        stderr = math.sqrt(var) / math.sqrt(n)
    else:
        stderr = 0.0
    return DeviationEstimate(float(eps), float(t), mean, stderr, int(n_paths), n_div)


def _run_chunks(simulate, n_paths, n_workers):
    """Collect ``simulate(start, stop)`` over fixed chunks into one array in index order."""
    bounds = [(s, min(s + CHUNK, n_paths)) for s in range(0, n_paths, CHUNK)]
    if n_workers is None or n_workers <= 1 or len(bounds) == 1:
        parts = [simulate(a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=int(n_workers)) as pool:
            parts = list(pool.map(lambda ab: simulate(*ab), bounds))
    return np.concatenate(parts)


def _distances(states, lam):
    with np.errstate(over="ignore", invalid="ignore"):
        v = np.linalg.norm(states - lam, axis=-1)
    v[~np.isfinite(v)] = np.nan
    return v


def _check_common(field, lam, x0, grid, t, n_paths):
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    d = field.dimension
    lam = _as_state(lam, d, "lam")
    x0 = _as_state(x0, d)
    k = grid.node(t)
    return lam, x0, k


def expected_deviation(field, eps, lam, t, grid, n_paths, master_seed, x0, n_workers=1):
    """Estimate ``M |X_t^eps - lam|`` from ``n_paths`` Euler-Maruyama paths.

    Path ``i`` is exactly ``em_sde_solve(field, eps, x0, grid, path_seed(master_seed, i))``.
    Diverged paths are left out of the mean and counted in ``n_diverged``.

    Parameters
    ----------
    field : PolyVectorField
    eps : float
        Noise intensity, >= 0. ``eps == 0`` gives the deterministic value with zero stderr.
    lam : array_like
        Anchor point.
    t : float
        Observation time; must be a node of ``grid``.
    grid : TimeGrid
    n_paths : int
        At least 2.
    master_seed : int
    x0 : array_like
        Initial state.
    n_workers : int
        Threads used for the chunks; the result does not depend on it.

    Returns
    -------
    DeviationEstimate
    """
    if eps < 0:
        raise ValueError("noise intensity must be non-negative")
    lam, x0, k = _check_common(field, lam, x0, grid, t, n_paths)
    d = field.dimension
    if k == 0:
        values = np.full(n_paths, float(np.linalg.norm(x0 - lam)))
        return _reduce(values, eps, t, n_paths)

    if eps == 0:
        states, _ = euler_maruyama_paths(field, x0, grid, None, nodes=[k], steps=k)
        values = np.full(n_paths, _distances(states[:, 0], lam)[0])
        return _reduce(values, eps, t, n_paths)

    sq_eps, sq_dt = math.sqrt(eps), math.sqrt(grid.dt)

    def simulate(a, b):
        shocks = np.empty((b - a, k, d))
        for j, i in enumerate(range(a, b)):
            rng = np.random.default_rng(path_seed(master_seed, i))
            # same arithmetic as em_sde_solve, so each path matches it bit for bit
            shocks[j] = sq_eps * (rng.standard_normal((grid.steps, d)) * sq_dt)[:k]
        states, _ = euler_maruyama_paths(field, x0, grid, shocks, nodes=[k], steps=k)
        return _distances(states[:, 0], lam)

    values = _run_chunks(simulate, n_paths, n_workers)
    return _reduce(values, eps, t, n_paths)


def expected_deviation_conditional(field, D, wiener, eps, lam, t, grid, n_paths, master_seed, x0,
                                   n_workers=1):
    """Estimate ``M |X_t^eps(omega) - lam|`` with the recorded path ``omega`` held fixed.

    Only the fresh eps-noise is averaged over; path ``i`` is
    ``em_two_noise_solve(field, D, wiener, eps, x0, grid, path_seed(master_seed, i))``.
    """
    if D < 0 or eps < 0:
        raise ValueError("noise intensities must be non-negative")
    if wiener.grid != grid:
        raise GridMismatchError("Wiener path grid differs from the integration grid")
    lam, x0, k = _check_common(field, lam, x0, grid, t, n_paths)
    d = field.dimension
    if wiener.dimension != d:
        raise DimensionError(f"Wiener path has {wiener.dimension} components, field has {d}")

    if k == 0:
        values = np.full(n_paths, float(np.linalg.norm(x0 - lam)))
        return _reduce(values, eps, t, n_paths)
    if eps == 0:
        shocks = two_noise_shocks(wiener, D, 0.0, [0], d)[:, :k] if D > 0 else None
        states, _ = euler_maruyama_paths(field, x0, grid, shocks, nodes=[k], steps=k)
        values = np.full(n_paths, _distances(states[:, 0], lam)[0])
        return _reduce(values, eps, t, n_paths)

    def simulate(a, b):
        seeds = [path_seed(master_seed, i) for i in range(a, b)]
        shocks = two_noise_shocks(wiener, D, eps, seeds, d)[:, :k]
        states, _ = euler_maruyama_paths(field, x0, grid, shocks, nodes=[k], steps=k)
        return _distances(states[:, 0], lam)

    values = _run_chunks(simulate, n_paths, n_workers)
    return _reduce(values, eps, t, n_paths)


def _check_ladder(ladder):
    ladder = [float(e) for e in ladder]
    if not ladder:
        raise ValueError("noise ladder is empty")
    if any(e < 0 for e in ladder):
        raise ValueError("noise ladder entries must be non-negative")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("noise ladder must be strictly decreasing")
    return ladder


def _finish(estimates, bound, failed, lam, t):
    means = np.array([e.mean for e in estimates])
    finite = np.isfinite(means)
    if not finite.any():
        return SweepReport(estimates, bound, float("nan"), False, lam, t, failed)
    i = int(np.argmin(np.where(finite, means, np.inf)))
    min_mean = float(means[i])
    ok = (not failed) and min_mean <= bound + 3.0 * estimates[i].stderr
    return SweepReport(estimates, bound, min_mean, bool(ok), lam, t, failed)


def _sweep(estimate, ladder, n_paths, t):
    estimates, failed = [], []
    for eps in ladder:
        try:
            estimates.append(estimate(eps))
        except EstimationError:
            failed.append(eps)
            estimates.append(DeviationEstimate(eps, float(t), float("nan"), float("nan"), n_paths, n_paths))
    return estimates, failed


def eps_sweep(field, lam, t, grid, ladder, n_paths, master_seed, x0, n_workers=1, bound=None):
    """Expected deviation at every rung of a decreasing noise ladder, checked against the master bound.

    The same ``master_seed`` is used on every rung, so rungs share their
    underlying normal draws and differ only in scale.

    Parameters
    ----------
    ladder : sequence of float
        Strictly decreasing, non-negative.
    bound : float, optional
        Precomputed ``|u(t, lam)|``; by default it is obtained by integrating
        the linear master equation.

    Returns
    -------
    SweepReport
    """
    ladder = _check_ladder(ladder)
    lam = _as_state(lam, field.dimension, "lam")
    if bound is None:
        bound = float(np.linalg.norm(residual_generic(field, lam, t, x0, max_dt=min(grid.dt, 1e-4))))
    estimates, failed = _sweep(
        lambda e: expected_deviation(field, e, lam, t, grid, n_paths, master_seed, x0, n_workers),
        ladder, n_paths, t)
    return _finish(estimates, bound, failed, lam, float(t))


def conditional_sweep(field, D, wiener, lam, t, grid, ladder, n_paths, master_seed, x0, bound,
                      n_workers=1):
    """Like :func:`eps_sweep` for the two-noise model with a fixed recorded path and a given bound."""
    ladder = _check_ladder(ladder)
    lam = _as_state(lam, field.dimension, "lam")
    estimates, failed = _sweep(
        lambda e: expected_deviation_conditional(field, D, wiener, e, lam, t, grid, n_paths,
                                                 master_seed, x0, n_workers),
        ladder, n_paths, t)
    return _finish(estimates, float(bound), failed, lam, float(t))
