"""
Reference values computed independently of the package solvers.

Nothing here calls the package's integrators or closed forms: linear flows
use matrix exponentials of an augmented system, scalar master residuals use
adaptive quadrature of their defining integrals, and derivatives use central
differences.
"""
import math

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm


def central_jacobian(f, x, h=1e-6):
    """Central finite differences of ``f: R^d -> R^m`` at ``x``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def linear_flow(M, x0, harmonics, t):
    """Exact solution of ``x' = M x + sum_i f_i(t)`` at time ``t``.

    ``harmonics`` lists ``(component, amplitude, frequency, kind)``. Each
    harmonic is generated by an oscillator appended to the state, so the
    whole flow is a single matrix exponential.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    d = M.shape[0]
    n = d + 2 * len(harmonics)
    G = np.zeros((n, n))
    G[:d, :d] = M
    z0 = np.zeros(n)
    z0[:d] = x0
    for h, (i, amp, freq, kind) in enumerate(harmonics):
        s, c = d + 2 * h, d + 2 * h + 1
        # s = sin(freq t), c = cos(freq t)
        G[s, c] = freq
        G[c, s] = -freq
        z0[c] = 1.0
        G[i, s if kind == "sin" else c] += amp
    return (expm(G * t) @ z0)[:d]


def scalar_master_residual(kappa, source, forcing, x0, lam, t):
    """``(x0 - lam) e^{kappa t} + int_0^t (source + forcing(tau)) e^{kappa (t - tau)} dtau`` by quadrature."""
    def integrand(tau):
        return (source + forcing(tau)) * math.exp(kappa * (t - tau))

    val, _ = quad(integrand, 0.0, t, epsabs=1e-13, epsrel=1e-12, limit=400)
    return (x0 - lam) * math.exp(kappa * t) + val


def cubic_master_residual(a, b, A, omega, B, theta, x0, lam, t):
    kappa = 2 * a * lam - b
    return scalar_master_residual(
        kappa, a * lam ** 2 - b * lam,
        lambda s: A * math.sin(omega * s) + B * math.cos(theta * s), x0, lam, t)


def dwell_master_residual(a, b, c, A, omega, B, theta, x0, lam, t):
    kappa = -(3 * a * lam ** 2 - b)
    return scalar_master_residual(
        kappa, -a * lam ** 3 + b * lam + c,
        lambda s: A * math.sin(omega * s) + B * math.cos(theta * s), x0, lam, t)


def folded_normal_mean(sigma):
    """``E|Z|`` for ``Z ~ N(0, sigma^2)``."""
    return sigma * math.sqrt(2.0 / math.pi)


def ou_variance(eps, t):
    """Variance at time ``t`` of ``dX = -X dt + sqrt(eps) dW`` started from a point."""
    return eps * (1.0 - math.exp(-2.0 * t)) / 2.0


def ou_cost(x, y, t):
    """Minimal action for ``b(x) = -x`` from ``x`` to ``y`` in time ``t``."""
    return (y - x * math.exp(-t)) ** 2 / (1.0 - math.exp(-2.0 * t))


def free_cost(x, y, t):
    """Minimal action for zero drift: ``|y - x|^2 / (2 t)``."""
    return float(np.sum((np.asarray(y) - np.asarray(x)) ** 2)) / (2.0 * t)


def dwell_barrier(a=1.0, b=1.0):
    """Twice the potential rise from the well at ``-sqrt(b/a)`` to the saddle at 0."""
    xm = math.sqrt(b / a)
    U = lambda x: a / 4 * x ** 4 - b / 2 * x ** 2
    return 2.0 * (U(0.0) - U(-xm))
