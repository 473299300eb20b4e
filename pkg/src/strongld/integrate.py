"""
Fixed-step integrators.

* :func:`ode_solve` -- classical RK4 for the deterministic flow ``x' = b(x, t)``.
* :func:`master_ode_solve` -- RK4 for the linear master equation
  ``u' = J[b](lam, t) u + b(lam, t)``, ``u(0) = x0 - lam``.
* :func:`em_sde_solve` -- Euler-Maruyama for ``dX = b dt + sqrt(eps) dW``.
* :func:`em_two_noise_solve` -- Euler-Maruyama with a recorded, shared
  Wiener path of intensity D plus an independent noise of intensity eps.
* :func:`master_sde_solve` -- Euler-Maruyama for the linear stochastic
  master equation driven by a recorded Wiener path.

All stochastic routines are pure functions of their inputs and seed.
Non-finite states are never clamped: a :class:`~strongld.errors.DivergenceError`
carrying the first bad node is raised instead.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError, DivergenceError, GridMismatchError, OutOfRangeError
from .polyfield import PolyDiffusionMatrix

__all__ = [
    "TimeGrid",
    "WienerPath",
    "Trajectory",
    "ode_solve",
    "master_ode_solve",
    "em_sde_solve",
    "em_two_noise_solve",
    "master_sde_solve",
    "euler_maruyama_paths",
    "format_float",
]


def format_float(x):
    """17 significant digits, enough to round-trip any double."""
    return f"{float(x):.16e}"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = t0 + k dt`` with ``dt = (t1 - t0) / steps``."""

    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "t1", float(self.t1))
        object.__setattr__(self, "steps", int(self.steps))
        if not self.t1 > self.t0:
            raise ValueError(f"grid needs t1 > t0, got [{self.t0}, {self.t1}]")
        if self.steps < 1:
            raise ValueError("grid needs at least one step")

    @classmethod
    def covering(cls, t, max_dt, t0=0.0):
        """Smallest uniform grid on ``[t0, t]`` with step at most ``max_dt``."""
        span = t - t0
        steps = max(1, math.ceil(span / max_dt - 1e-9))
        return cls(t0, t, steps)

    @property
    def dt(self):
        return (self.t1 - self.t0) / self.steps

    @property
    def times(self):
        return self.t0 + np.arange(self.steps + 1) * self.dt

    def half_times(self):
        """Node and midpoint times; index ``2k`` is node k."""
        return self.t0 + np.arange(2 * self.steps + 1) * (0.5 * self.dt)

    def node(self, t, rtol=1e-9):
        """Index of the node at time ``t``; raises if ``t`` is not on the grid."""
        pos = (t - self.t0) / self.dt
        k = int(round(pos))
        if not 0 <= k <= self.steps or abs(pos - k) > rtol * max(1.0, abs(pos)):
            raise OutOfRangeError(f"time {t} is not a node of {self}")
        return k


@dataclass(frozen=True)
class Trajectory:
    grid: TimeGrid
    states: np.ndarray

    @property
    def times(self):
        return self.grid.times

    @property
    def final(self):
        return self.states[-1]

    def at(self, t):
        return self.states[self.grid.node(t)]


def _first_bad(states):
    bad = ~np.all(np.isfinite(states), axis=-1)
    return int(np.argmax(bad)) if bad.any() else -1


def _as_state(x, d, name="x0"):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (d,):
        raise DimensionError(f"{name} has shape {x.shape}, expected ({d},)")
    return x


# -- Wiener paths --------------------------------------------------------


class WienerPath:
    """A recorded standard Brownian realization on a uniform grid.

    ``values[0] = 0``; between nodes the path is taken piecewise linear.
    Regenerating with the same seed and grid reproduces it bit-exactly.

    Parameters
    ----------
    grid : TimeGrid
    values : ndarray, shape (steps + 1, d)
    seed : int or None
        Seed the path was drawn from, if known.
    label : str
        Free-form tag, e.g. the intensity the path is meant to be scaled by.
    """

    def __init__(self, grid, values, seed=None, label=""):
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != grid.steps + 1:
            raise GridMismatchError(f"{values.shape[0]} nodes for a grid with {grid.steps} steps")
        if np.any(values[0] != 0.0):
            raise ValueError("a Wiener path must start at 0")
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.seed = None if seed is None else int(seed)
        self.label = str(label)
        if any(ch.isspace() for ch in self.label):
            raise ValueError("Wiener path label must not contain whitespace")

    @classmethod
    def generate(cls, grid, dimension=1, seed=0, label=""):
        rng = np.random.default_rng(seed)
        draws = rng.standard_normal((grid.steps, dimension)) * math.sqrt(grid.dt)
        values = np.vstack([np.zeros((1, dimension)), np.cumsum(draws, axis=0)])
        return cls(grid, values, seed=seed, label=label)

    @property
    def dimension(self):
        return self.values.shape[1]

    @property
    def increments(self):
        return np.diff(self.values, axis=0)

    def __eq__(self, other):
        if not isinstance(other, WienerPath):
            return NotImplemented
        return (self.grid == other.grid and self.seed == other.seed
                and self.label == other.label and np.array_equal(self.values, other.values))

    def __call__(self, t):
        """Piecewise-linear interpolation of the path at time ``t``."""
        g = self.grid
        if t < g.t0 - 1e-12 or t > g.t1 + 1e-12 * max(1.0, abs(g.t1)):
            raise OutOfRangeError(f"time {t} outside recorded path [{g.t0}, {g.t1}]")
        pos = min(max((t - g.t0) / g.dt, 0.0), float(g.steps))
        k = min(int(pos), g.steps - 1)
        frac = pos - k
        return self.values[k] + frac * (self.values[k + 1] - self.values[k])

    def to_csv(self, path):
        g = self.grid
        seed = "none" if self.seed is None else str(self.seed)
        lines = [
            f"# seed={seed} dt={format_float(g.dt)} t0={format_float(g.t0)} "
            f"t1={format_float(g.t1)} steps={g.steps} label={self.label}",
            ",".join(["t"] + [f"w_{i + 1}" for i in range(self.dimension)]),
        ]
        for t, row in zip(g.times, self.values):
            lines.append(",".join([format_float(t)] + [format_float(v) for v in row]))
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            first = fh.readline().strip()
            if not first.startswith("#"):
                raise ValueError(f"{path}: missing '# seed=... dt=...' metadata line")
            meta = dict(item.split("=", 1) for item in first[1:].split() if "=" in item)
            data = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
        steps = int(meta.get("steps", data.shape[0] - 1))
        t0 = float(meta.get("t0", data[0, 0]))
        t1 = float(meta.get("t1", data[-1, 0]))
        grid = TimeGrid(t0, t1, steps)
        if not np.allclose(data[:, 0], grid.times, rtol=0, atol=1e-9 * max(1.0, abs(t1))):
            raise GridMismatchError(f"{path}: time column does not match the declared grid")
        seed = meta.get("seed", "none")
        return cls(grid, data[:, 1:], seed=None if seed == "none" else int(seed),
                   label=meta.get("label", ""))


# -- deterministic -------------------------------------------------------


def ode_solve(field, x0, grid, on_divergence="raise"):
    """Classical fixed-step RK4 for ``x' = b(x, t)``.

    With ``on_divergence="nan"`` a blow-up fills the remaining nodes with NaN
    instead of raising :class:`DivergenceError`.
    """
    if on_divergence not in ("raise", "nan"):
        raise ValueError(f"unknown on_divergence {on_divergence!r}")
    x = _as_state(x0, field.dimension)
    times = grid.times
    h = grid.dt
    states = np.empty((grid.steps + 1, field.dimension))
    states[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(grid.steps):
            t = times[k]
            tm = t + 0.5 * h
            k1 = field(x, t)
            k2 = field(x + 0.5 * h * k1, tm)
            k3 = field(x + 0.5 * h * k2, tm)
            k4 = field(x + h * k3, times[k + 1])
            x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(x)):
                if on_divergence == "raise":
                    raise DivergenceError(k + 1)
                states[k + 1:] = np.nan
                break
            states[k + 1] = x
    return Trajectory(grid, states)


def master_ode_solve(field, lam, x0, grid):
    """RK4 for ``u' = J[b](lam, t) u + b(lam, t)``, ``u(0) = x0 - lam``.

    ``lam`` is held fixed; the Jacobian and the inhomogeneity are evaluated at
    every stage time.
    """
    d = field.dimension
    lam = _as_state(lam, d, "lam")
    u0 = _as_state(x0, d) - lam
    ts = grid.half_times()
    with np.errstate(over="ignore", invalid="ignore"):
        J = np.ascontiguousarray(field.jacobian(lam, ts))
        b = np.ascontiguousarray(field(lam, ts))
        states = _kernels.rk4_linear(J, b, u0, grid.dt)
    bad = _first_bad(states)
    if bad >= 0:
        raise DivergenceError(bad)
    return Trajectory(grid, states)


# -- stochastic ----------------------------------------------------------


def euler_maruyama_paths(field, x0, grid, shocks=None, nodes=None, steps=None):
    """Euler-Maruyama over a batch of paths with given additive shocks (compiled loop).

    Parameters
    ----------
    field : PolyVectorField
    x0 : array_like, shape (d,) or (n, d)
    grid : TimeGrid
    shocks : ndarray, shape (n, steps, d), optional
        Total noise added on each step; ``None`` gives forward Euler.
    nodes : sequence of int, optional
        Node indices to record. Defaults to all nodes.
    steps : int, optional
        Stop after this many steps (default: the whole grid). ``shocks`` then
        needs only ``steps`` entries along its second axis.

    Returns
    -------
    states : ndarray, shape (n, len(nodes), d)
        A diverged path holds its first non-finite state and NaN afterwards.
    first_bad : ndarray of int, shape (n,)
        First non-finite node per path, -1 if the path stayed finite.
    """
    d = field.dimension
    x = np.array(x0, dtype=float, ndmin=2)
    if shocks is not None:
        x = np.broadcast_to(x, (shocks.shape[0], d))
    if x.shape[-1] != d:
        raise DimensionError(f"x0 has trailing dimension {x.shape[-1]}, expected {d}")
    steps = grid.steps if steps is None else int(steps)
    nodes = np.arange(steps + 1) if nodes is None else np.asarray(nodes, dtype=int)
    slot = np.full(steps + 1, -1, dtype=np.int64)
    slot[nodes] = np.arange(len(nodes))
    compiled = field._c
    comp = np.zeros(len(compiled.const), dtype=np.int64)
    for i, sl in enumerate(compiled.slices):
        comp[sl] = i
    coef = np.ascontiguousarray(field.coefficients(grid.times[:steps]))
    if shocks is None:
        sh = np.zeros((1, 1, d))
    else:
        sh = np.ascontiguousarray(shocks, dtype=float)
        if sh.shape[1] < steps or sh.shape[2] != d:
            raise DimensionError(f"shocks have shape {sh.shape}, need (n, >= {steps}, {d})")
    return _kernels.euler_poly_paths(np.ascontiguousarray(x, dtype=float), sh, shocks is not None,
                                     coef, compiled.exps, comp, grid.dt, slot, len(nodes))


def _single(field, x0, grid, shocks):
    states, bad = euler_maruyama_paths(field, x0, grid, shocks)
    if bad[0] >= 0:
        raise DivergenceError(bad[0])
    return Trajectory(grid, states[0])


def em_sde_solve(field, eps, x0, grid, seed=0):
    """Euler-Maruyama ``X_{k+1} = X_k + b(X_k, t_k) dt + sqrt(eps) dW_k``.

    ``dW_k ~ N(0, dt I)`` comes from ``numpy.random.default_rng(seed)``;
    with ``eps == 0`` no numbers are drawn and the scheme is forward Euler.
    """
    if eps < 0:
        raise ValueError("noise intensity must be non-negative")
    d = field.dimension
    x0 = _as_state(x0, d)
    shocks = None
    if eps > 0:
        rng = np.random.default_rng(seed)
        dW = rng.standard_normal((grid.steps, d)) * math.sqrt(grid.dt)
        shocks = (math.sqrt(eps) * dW)[None]
    return _single(field, x0, grid, shocks)


def two_noise_shocks(wiener, D, eps, seeds, dimension):
    """Per-path shocks ``sqrt(D) dW(omega) + sqrt(eps) dw(varpi)``, shape (n, steps, d)."""
    g = wiener.grid
    base = math.sqrt(D) * wiener.increments
    if eps == 0:
        return np.broadcast_to(base, (len(seeds),) + base.shape)
    scale = math.sqrt(eps) * math.sqrt(g.dt)
    out = np.empty((len(seeds), g.steps, dimension))
    for i, s in enumerate(seeds):
        out[i] = base + scale * np.random.default_rng(s).standard_normal((g.steps, dimension))
    return out


def em_two_noise_solve(field, D, wiener, eps, x0, grid, seed=0):
    """Euler-Maruyama with a fixed recorded path (intensity D) and fresh noise (intensity eps).

    ``seed`` drives only the eps-noise, so with ``eps == 0`` the result is a
    deterministic function of the recorded path.
    """
    if D < 0 or eps < 0:
        raise ValueError("noise intensities must be non-negative")
    if wiener.grid != grid:
        raise GridMismatchError("Wiener path grid differs from the integration grid")
    d = field.dimension
    if wiener.dimension != d:
        raise DimensionError(f"Wiener path has {wiener.dimension} components, field has {d}")
    x0 = _as_state(x0, d)
    shocks = None
    if D > 0 or eps > 0:
        shocks = two_noise_shocks(wiener, D, eps, [seed], d)
    return _single(field, x0, grid, shocks)


def _master_sde_coefficients(field, C, lam, times):
    J = np.ascontiguousarray(field.jacobian(lam, times))
    b = np.ascontiguousarray(field(lam, times))
    Cv = np.ascontiguousarray(np.broadcast_to(C(lam, times), times.shape + (field.dimension, C.n_noise)))
    if C.is_state_independent:
        Jk = np.zeros(times.shape + (C.n_noise, field.dimension, field.dimension))
    else:
        Jk = np.stack([C.column_jacobian(k, lam, times) for k in range(C.n_noise)], axis=1)
    return J, b, Cv, np.ascontiguousarray(Jk)


def master_sde_terminal(field, C, lam, x0, wiener, nsteps):
    """Run the stochastic master equation for ``nsteps`` steps on the path's grid; return all states."""
    d = field.dimension
    lam = _as_state(lam, d, "lam")
    u0 = _as_state(x0, d) - lam
    times = wiener.grid.times[: nsteps + 1]
    with np.errstate(over="ignore", invalid="ignore"):
        J, b, Cv, Jk = _master_sde_coefficients(field, C, lam, times)
        dW = np.ascontiguousarray(wiener.increments[:nsteps])
        states = _kernels.euler_linear_sde(J, b, Cv, Jk, dW, u0, wiener.grid.dt, nsteps)
    bad = _first_bad(states)
    if bad >= 0:
        raise DivergenceError(bad)
    return states


def master_sde_solve(field, C, lam, x0, wiener, grid):
    """Euler-Maruyama for the linear stochastic master equation.

    ``du = (J[b](lam, t) u + b(lam, t)) dt + sum_k (Jk[C](lam, t) u) dW_k + C(lam, t) dW``
    with ``u(0) = x0 - lam``, where ``Jk[C]`` is the Jacobian of column k of C.
    The recorded increments of ``wiener`` drive the noise. For constant C the
    multiplicative term vanishes and the noise is purely additive.
    """
    if wiener.grid != grid:
        raise GridMismatchError("Wiener path grid differs from the integration grid")
    if not isinstance(C, PolyDiffusionMatrix):
        raise TypeError("C must be a PolyDiffusionMatrix")
    if C.dimension != field.dimension or C.n_noise != wiener.dimension:
        raise DimensionError("diffusion matrix shape does not match field and Wiener path")
    states = master_sde_terminal(field, C, lam, x0, wiener, grid.steps)
    return Trajectory(grid, states)
