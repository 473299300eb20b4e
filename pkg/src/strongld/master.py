"""
Master-equation residuals ``u(t, lam)`` and the quasiclassical path ``lam(t)``.

For a fixed anchor ``lam`` the residual is the solution at time ``t`` of the
linear master equation

    u' = J[b](lam, s) u + b(lam, s),    u(0) = x0 - lam,    0 <= s <= t.

The quasiclassical path is the curve ``lam(t)`` with ``u(t, lam(t)) = 0``,
found node by node with a warm-started damped Newton iteration.

For the one-dimensional cubic and double-well drifts the residual has a
closed form. Writing ``kappa`` for the (constant) Jacobian and ``s0`` for the
autonomous part of the drift at ``lam``,

    u(t) = (x0 - lam) e^{kappa t} + s0 E(kappa, t)
           + A S(kappa, Omega, t) + B K(kappa, Theta, t)

with ``E = (e^{kappa t} - 1) / kappa`` and ``S``, ``K`` the convolutions of
``sin`` and ``cos`` against ``e^{kappa (t - tau)}``.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DimensionError, DivergenceError, GridMismatchError
from .integrate import TimeGrid, format_float, master_ode_solve, master_sde_terminal
from .polyfield import cubic_drift, double_well_drift

__all__ = [
    "CubicParams",
    "DoubleWellParams",
    "LambdaPath",
    "residual_generic",
    "residual_sde_generic",
    "residual_cubic_closed",
    "residual_dwell_closed",
    "residual_cubic_stochastic",
    "generic_residual",
    "sde_residual",
    "cubic_residual",
    "dwell_residual",
    "cubic_stochastic_residual",
    "solve_lambda_path",
    "delta_curve",
]

# exp overflows just above 709
_MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class CubicParams:
    """Cubic potential ``V = -(a/3) x^3 + (b/2) x^2`` with harmonic forcing."""

    a: float = 1.0
    b: float = 1.0
    A: float = 0.0
    omega: float = 0.0
    B: float = 0.0
    theta: float = 0.0
    x0: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("cubic potential needs a > 0 and b > 0")

    def field(self):
        return cubic_drift(self.a, self.b, self.A, self.omega, self.B, self.theta)


@dataclass(frozen=True)
class DoubleWellParams:
    """Tilted double well ``V = (a/4) x^4 - (b/2) x^2 - c x`` with harmonic forcing."""

    a: float = 1.0
    b: float = 1.0
    c: float = 0.0
    A: float = 0.0
    omega: float = 0.0
    B: float = 0.0
    theta: float = 0.0
    x0: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("double-well potential needs a > 0 and b > 0")

    def field(self):
        return double_well_drift(self.a, self.b, self.c, self.A, self.omega, self.B, self.theta)


# -- closed forms --------------------------------------------------------


def _check_exponent(kappa, t):
    if kappa * t > _MAX_EXPONENT:
        raise DivergenceError(0, f"residual overflows: kappa*t = {kappa * t:.3g}")


def _exp_integral(kappa, t):
    """int_0^t e^{kappa (t - tau)} dtau, with the kappa -> 0 limit t."""
    if kappa == 0.0:
        return t
    return math.expm1(kappa * t) / kappa


def _growth_minus_trig(kappa, freq, t):
    # e^{kappa t} - cos(freq t), written without cancellation near 0
    return math.expm1(kappa * t) + 2.0 * math.sin(0.5 * freq * t) ** 2


def _sin_convolution(kappa, omega, t):
    """int_0^t sin(omega tau) e^{kappa (t - tau)} dtau."""
    denom = kappa * kappa + omega * omega
    if denom == 0.0:
        return 0.0
    return (omega * _growth_minus_trig(kappa, omega, t) - kappa * math.sin(omega * t)) / denom


def _cos_convolution(kappa, theta, t):
    """int_0^t cos(theta tau) e^{kappa (t - tau)} dtau."""
    denom = kappa * kappa + theta * theta
    if denom == 0.0:
        return t
    return (kappa * _growth_minus_trig(kappa, theta, t) + theta * math.sin(theta * t)) / denom


def _scalar_linear_residual(kappa, source, x0, lam, A, omega, B, theta, t):
    _check_exponent(kappa, t)
    u = (x0 - lam) * math.exp(kappa * t) + source * _exp_integral(kappa, t)
    if A != 0.0:
        u += A * _sin_convolution(kappa, omega, t)
    if B != 0.0:
        u += B * _cos_convolution(kappa, theta, t)
    return u


def residual_cubic_closed(p, lam, t):
    """Closed-form residual for the cubic drift ``a x^2 - b x + A sin + B cos``."""
    lam = float(lam)
    kappa = 2.0 * p.a * lam - p.b
    source = p.a * lam * lam - p.b * lam
    return _scalar_linear_residual(kappa, source, p.x0, lam, p.A, p.omega, p.B, p.theta, t)


def residual_dwell_closed(p, lam, t):
    """Closed-form residual for the double-well drift ``-a x^3 + b x + c + A sin + B cos``."""
    lam = float(lam)
    kappa = -(3.0 * p.a * lam * lam - p.b)
    source = -p.a * lam ** 3 + p.b * lam + p.c
    return _scalar_linear_residual(kappa, source, p.x0, lam, p.A, p.omega, p.B, p.theta, t)


def _path_exponential_integral(wiener, kappa, t):
    """Trapezoid rule for int_0^t W(tau) e^{kappa (t - tau)} dtau on the path's own grid."""
    g = wiener.grid
    times = g.times
    k = int(np.searchsorted(times, t, side="right"))
    tau = times[:k]
    w = wiener.values[:k, 0]
    if tau[-1] < t:
        tau = np.append(tau, t)
        w = np.append(w, wiener(t)[0])
    return float(np.trapezoid(w * np.exp(kappa * (t - tau)), tau))


def residual_cubic_stochastic(p, D, wiener, lam, t):
    """Residual of the cubic master equation driven by ``sqrt(D) dW`` along a recorded path.

    The stochastic convolution is integrated by parts,

        int_0^t e^{kappa (t - tau)} dW = W(t) + kappa int_0^t W(tau) e^{kappa (t - tau)} dtau,

    and the remaining Riemann integral is evaluated by the trapezoid rule.
    """
    base = residual_cubic_closed(p, lam, t)
    if D == 0:
        return base
    if wiener.dimension != 1:
        raise DimensionError("the cubic residual needs a one-dimensional Wiener path")
    w_t = float(wiener(t)[0])
    kappa = 2.0 * p.a * float(lam) - p.b
    sd = math.sqrt(D)
    return base + sd * kappa * _path_exponential_integral(wiener, kappa, t) + sd * w_t


# -- generic residuals ---------------------------------------------------


def residual_generic(field, lam, t, x0, max_dt=1e-4):
    """Terminal value of the RK4-integrated master equation on ``[0, t]``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if t == 0:
        return x0 - lam
    return master_ode_solve(field, lam, x0, TimeGrid.covering(t, max_dt)).final


def residual_sde_generic(field, C, lam, t, x0, wiener):
    """Terminal value of the Euler-Maruyama stochastic master equation at node time ``t``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    k = wiener.grid.node(t)
    if k == 0:
        return x0 - lam
    return master_sde_terminal(field, C, lam, x0, wiener, k)[-1]


def generic_residual(field, x0, max_dt=1e-4):
    """``(lam, t) -> u(t, lam)`` for any polynomial field, via the RK4 master equation."""
    return lambda lam, t: residual_generic(field, lam, t, x0, max_dt)


def sde_residual(field, C, x0, wiener):
    return lambda lam, t: residual_sde_generic(field, C, lam, t, x0, wiener)


def cubic_residual(p):
    return lambda lam, t: np.array([residual_cubic_closed(p, np.ravel(lam)[0], t)])


def dwell_residual(p):
    return lambda lam, t: np.array([residual_dwell_closed(p, np.ravel(lam)[0], t)])


def cubic_stochastic_residual(p, D, wiener):
    return lambda lam, t: np.array([residual_cubic_stochastic(p, D, wiener, np.ravel(lam)[0], t)])


# -- quasiclassical path -------------------------------------------------


@dataclass
class LambdaPath:
    """Solved ``lam(t)`` with per-node diagnostics.

    Unconverged nodes hold NaN in ``lambdas``; they are never interpolated.
    """

    grid: TimeGrid
    lambdas: np.ndarray
    residual_norms: np.ndarray
    converged: np.ndarray

    @property
    def times(self):
        return self.grid.times

    @property
    def n_converged(self):
        return int(np.count_nonzero(self.converged))

    @property
    def converged_fraction(self):
        return self.n_converged / len(self.converged)

    def to_csv(self, path, header_lines=()):
        d = self.lambdas.shape[1]
        lines = [f"# {h}" for h in header_lines]
        lines.append(",".join(["t"] + [f"lambda_{i + 1}" for i in range(d)]
                              + ["residual_norm", "converged"]))
        for t, lam, r, ok in zip(self.times, self.lambdas, self.residual_norms, self.converged):
            lines.append(",".join([format_float(t)] + [format_float(v) for v in lam]
                                  + [format_float(r), str(int(ok))]))
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def _safe_norm(residual, lam, t):
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            f = np.asarray(residual(lam, t), dtype=float)
    except (DivergenceError, FloatingPointError, OverflowError):
        return None, math.inf
    norm = float(np.linalg.norm(f))
    return (f, norm) if math.isfinite(norm) else (None, math.inf)


def _fd_jacobian(residual, lam, t):
    d = lam.shape[0]
    J = np.empty((d, d))
    for j in range(d):
        h = 1e-6 * (1.0 + abs(lam[j]))
        up, down = lam.copy(), lam.copy()
        up[j] += h
        down[j] -= h
        f_up, n_up = _safe_norm(residual, up, t)
        f_dn, n_dn = _safe_norm(residual, down, t)
        if f_up is None or f_dn is None:
            return None
        J[:, j] = (f_up - f_dn) / (2.0 * h)
    return J


def _newton(residual, start, t, tol, max_iter):
    lam = start.copy()
    f, norm = _safe_norm(residual, lam, t)
    if f is None:
        return lam, False, norm
    for _ in range(max_iter):
        if norm <= tol:
            break
        J = _fd_jacobian(residual, lam, t)
        if J is None:
            break
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        scale = 1.0
        for _ in range(40):
            cand = lam + scale * step
            fc, nc = _safe_norm(residual, cand, t)
            if nc < norm:
                lam, f, norm = cand, fc, nc
                break
            scale *= 0.5
        else:
            break
    return lam, norm <= tol, norm


def _bracket_roots(residual, center, t, tol, radius, n_scan, max_iter):
    """Scan ``[center - radius, center + radius]`` for sign changes and refine each one."""
    xs = np.linspace(center - radius, center + radius, n_scan)
    fs = np.array([_safe_norm(residual, np.array([x]), t)[0] for x in xs], dtype=object)
    vals = np.array([np.nan if f is None else f[0] for f in fs])

    def scalar(x):
        f, _ = _safe_norm(residual, np.array([x]), t)
        return np.nan if f is None else f[0]

    roots = []
    for i in range(n_scan - 1):
        fa, fb = vals[i], vals[i + 1]
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        if fa == 0.0:
            root = xs[i]
        elif fa * fb < 0.0:
            root = brentq(scalar, xs[i], xs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
        else:
            continue
        lam, ok, norm = _newton(residual, np.array([root]), t, tol, max_iter)
        if ok:
            roots.append((float(lam[0]), norm))
    if np.isfinite(vals[-1]) and vals[-1] == 0.0:
        roots.append((float(xs[-1]), 0.0))
    return roots


def solve_lambda_path(residual, x0, grid, tol=1e-10, bracket_radius=2.0, max_iter=50,
                      scan_points=401):
    """Solve ``u(t_k, lam) = 0`` for ``lam`` at every grid node.

    Parameters
    ----------
    residual : callable
        ``residual(lam, t)`` returning ``u(t, lam)`` as an array of shape (d,).
    x0 : array_like
        Initial state; ``lam(0) = x0`` since ``u(0, lam) = x0 - lam``.
    grid : TimeGrid
        Must start at ``t0 = 0``.
    tol : float
        Residual norm accepted as a root.
    bracket_radius : float
        Half-width of the fallback sign-change scan around the previous root
        (one-dimensional problems only).
    max_iter : int
        Newton iterations per node.

    Notes
    -----
    Each node warm-starts from the last converged value. If Newton fails
    and d = 1, every root found in the bracket is collected and the one
    nearest the previous value wins, exact ties going to the smaller root.
    """
    if grid.t0 != 0.0:
        raise ValueError("the lambda path grid must start at t = 0")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = x0.shape[0]
    n = grid.steps + 1
    lambdas = np.full((n, d), np.nan)
    norms = np.full(n, np.inf)
    converged = np.zeros(n, dtype=bool)
    lambdas[0] = x0
    norms[0] = _safe_norm(residual, x0, 0.0)[1]
    converged[0] = norms[0] <= tol
    prev = x0.copy()
    times = grid.times
    for k in range(1, n):
        t = float(times[k])
        lam, ok, norm = _newton(residual, prev, t, tol, max_iter)
        if not ok and d == 1:
            roots = _bracket_roots(residual, float(prev[0]), t, tol, bracket_radius,
                                   scan_points, max_iter)
            if roots:
                best = min(roots, key=lambda r: (abs(r[0] - prev[0]), r[0]))
                lam, ok, norm = np.array([best[0]]), True, best[1]
        norms[k] = norm
        if ok:
            lambdas[k] = lam
            converged[k] = True
            prev = lam
    return LambdaPath(grid, lambdas, norms, converged)


def delta_curve(classical, lam):
    """Euclidean distance ``|x(t_k) - lam(t_k)|`` node by node."""
    if classical.grid != lam.grid:
        raise GridMismatchError("classical trajectory and lambda path use different grids")
    return np.linalg.norm(classical.states - lam.lambdas, axis=-1)
