"""Compiled inner loops for the master equations and the Euler-Maruyama paths.

The coefficient arrays are precomputed in numpy by the callers; these
kernels only run the sequential time stepping.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _affine(A, u, c, out):
    d = u.shape[0]
    for i in range(d):
        acc = c[i]
        for j in range(d):
            acc += A[i, j] * u[j]
        out[i] = acc


@njit(cache=True, nogil=True)
def rk4_linear(J, b, u0, dt):
    """RK4 for ``u' = J(t) u + b(t)``.

    ``J`` and ``b`` are sampled at half steps: index ``2k`` is node k,
    ``2k + 1`` its midpoint.
    """
    n = (J.shape[0] - 1) // 2
    d = u0.shape[0]
    out = np.empty((n + 1, d))
    u = u0.copy()
    out[0] = u
    k1 = np.empty(d)
    k2 = np.empty(d)
    k3 = np.empty(d)
    k4 = np.empty(d)
    tmp = np.empty(d)
    h2 = 0.5 * dt
    for k in range(n):
        i0 = 2 * k
        _affine(J[i0], u, b[i0], k1)
        for i in range(d):
            tmp[i] = u[i] + h2 * k1[i]
        _affine(J[i0 + 1], tmp, b[i0 + 1], k2)
        for i in range(d):
            tmp[i] = u[i] + h2 * k2[i]
        _affine(J[i0 + 1], tmp, b[i0 + 1], k3)
        for i in range(d):
            tmp[i] = u[i] + dt * k3[i]
        _affine(J[i0 + 2], tmp, b[i0 + 2], k4)
        for i in range(d):
            u[i] = u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        out[k + 1] = u
    return out


@njit(cache=True, nogil=True)
def euler_linear_sde(J, b, C, Jk, dW, u0, dt, nsteps):
    """Euler-Maruyama for ``du = (J u + b) dt + sum_k (Jk[k] u) dW_k + C dW``.

    Coefficients are sampled at grid nodes; ``dW`` holds the recorded
    increments, shape ``(steps, m)``.
    """
    d = u0.shape[0]
    m = dW.shape[1]
    out = np.empty((nsteps + 1, d))
    u = u0.copy()
    out[0] = u
    drift = np.empty(d)
    for s in range(nsteps):
        _affine(J[s], u, b[s], drift)
        for i in range(d):
            acc = dt * drift[i]
            for k in range(m):
                w = dW[s, k]
                lin = C[s, i, k]
                for j in range(d):
                    lin += Jk[s, k, i, j] * u[j]
                acc += lin * w
            drift[i] = acc
        for i in range(d):
            u[i] = u[i] + drift[i]
        out[s + 1] = u
    return out


@njit(cache=True, nogil=True)
def euler_poly_paths(x0, shocks, has_shocks, coef, exps, comp, dt, slot, n_slots):
    """Euler-Maruyama for a batch of paths under a polynomial drift.

    ``coef[k, T]`` holds the term coefficients at node k, ``exps[T]`` the
    exponents and ``comp[T]`` the output component of each term. ``slot[k]``
    is the output slot of node k, or -1. A path stops at its first
    non-finite state; its later slots are NaN.
    """
    n, d = x0.shape
    steps = coef.shape[0]
    n_terms = exps.shape[0]
    out = np.full((n, n_slots, d), np.nan)
    first_bad = np.full(n, -1, dtype=np.int64)
    x = np.empty(d)
    f = np.empty(d)
    for p in range(n):
        for i in range(d):
            x[i] = x0[p, i]
        if slot[0] >= 0:
            out[p, slot[0]] = x
        for k in range(steps):
            for i in range(d):
                f[i] = 0.0
            for term in range(n_terms):
                m = coef[k, term]
                for j in range(d):
                    for _ in range(exps[term, j]):
                        m *= x[j]
                f[comp[term]] += m
            ok = True
            for i in range(d):
                x[i] = x[i] + f[i] * dt
                if has_shocks:
                    x[i] = x[i] + shocks[p, k, i]
                if not np.isfinite(x[i]):
                    ok = False
            if not ok:
                first_bad[p] = k + 1
                if slot[k + 1] >= 0:
                    out[p, slot[k + 1]] = x
                break
            if slot[k + 1] >= 0:
                out[p, slot[k + 1]] = x
    return out, first_bad
