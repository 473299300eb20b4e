"""
Polynomial drift fields and diffusion matrices.

A drift field is stored as a sparse list of monomial terms per component,

    b_i(x, t) = sum_alpha c_alpha^i(t) x^alpha,

where each coefficient c_alpha^i(t) is a constant plus a finite sum of
harmonics ``amplitude * sin(omega t)`` or ``amplitude * cos(omega t)``.
Terms are kept in a canonical sorted form with duplicate multi-indices
merged, so differentiation and equality are deterministic.

Every evaluation routine broadcasts over leading axes of ``x`` (shape
``(..., d)``) and of ``t``, which is what the ensemble integrators and the
path-action code rely on.
"""
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .errors import DimensionError

__all__ = [
    "MultiIndex",
    "Harmonic",
    "TimeCoefficient",
    "PolyVectorField",
    "PolyDiffusionMatrix",
    "ConfinementReport",
    "eval_drift",
    "jacobian",
    "generalized_jacobian",
    "confinement_check",
    "cubic_drift",
    "double_well_drift",
    "linear_drift",
    "zero_drift",
]


class MultiIndex(tuple):
    """Exponent vector of a monomial ``x_1^e_1 ... x_d^e_d``."""

    def __new__(cls, exponents):
        exps = tuple(int(e) for e in exponents)
        if any(e < 0 for e in exps):
            raise ValueError(f"negative exponent in multi-index {exps}")
        return super().__new__(cls, exps)

    @property
    def order(self):
        return sum(self)


@dataclass(frozen=True)
class Harmonic:
    """``amplitude * sin(frequency * t)`` (or ``cos``); frequency in rad per unit time."""

    amplitude: float
    frequency: float
    kind: str = "sin"

    def __post_init__(self):
        if self.kind not in ("sin", "cos"):
            raise ValueError(f"harmonic kind must be 'sin' or 'cos', got {self.kind!r}")
        object.__setattr__(self, "frequency", float(self.frequency))
        object.__setattr__(self, "amplitude", float(self.amplitude))

    def __call__(self, t):
        trig = np.sin if self.kind == "sin" else np.cos
        return self.amplitude * trig(self.frequency * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class TimeCoefficient:
    """Constant plus harmonic time dependence of one monomial coefficient.

    Harmonics sharing ``(frequency, kind)`` are merged, and the list is kept
    sorted, so two coefficients describing the same function compare equal.
    """

    constant: float = 0.0
    harmonics: tuple = ()

    def __post_init__(self):
        merged = {}
        for h in self.harmonics:
            if not isinstance(h, Harmonic):
                h = Harmonic(*h)
            key = (h.frequency, h.kind)
            merged[key] = merged.get(key, 0.0) + h.amplitude
        harmonics = tuple(
            Harmonic(amp, freq, kind) for (freq, kind), amp in sorted(merged.items()) if amp != 0.0
        )
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "harmonics", harmonics)

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        return cls(float(value))

    @classmethod
    def forcing(cls, A=0.0, omega=0.0, B=0.0, theta=0.0, constant=0.0):
        """``constant + A sin(omega t) + B cos(theta t)``."""
        return cls(constant, (Harmonic(A, omega, "sin"), Harmonic(B, theta, "cos")))

    @property
    def is_zero(self):
        return self.constant == 0.0 and not self.harmonics

    @property
    def is_constant(self):
        return not self.harmonics

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        value = np.full(t.shape, self.constant)
        for h in self.harmonics:
            value = value + h(t)
        return value if value.ndim else float(value)

    def __add__(self, other):
        other = TimeCoefficient.coerce(other)
        return TimeCoefficient(self.constant + other.constant, self.harmonics + other.harmonics)

    def scaled(self, factor):
        factor = float(factor)
        return TimeCoefficient(
            self.constant * factor,
            tuple(Harmonic(h.amplitude * factor, h.frequency, h.kind) for h in self.harmonics),
        )


def _canonical_component(terms, dimension):
    merged = {}
    items = terms.items() if isinstance(terms, Mapping) else terms
    for exps, coef in items:
        idx = MultiIndex(exps)
        if len(idx) != dimension:
            raise DimensionError(f"multi-index {tuple(idx)} has length {len(idx)}, expected {dimension}")
        coef = TimeCoefficient.coerce(coef)
        merged[idx] = merged[idx] + coef if idx in merged else coef
    return tuple((idx, coef) for idx, coef in sorted(merged.items()) if not coef.is_zero)


class _Compiled(NamedTuple):
    exps: np.ndarray  # (T, d) int
    slices: tuple  # per-component slice into the term axis
    const: np.ndarray  # (T,)
    harmonics: tuple  # (term, frequency, is_sin, amplitude)
    dexps: tuple  # per coordinate j: exponents after d/dx_j, (T, d)
    dfac: tuple  # per coordinate j: exponent of x_j, (T,)


def _compile(dimension, components):
    exps, const, harmonics, slices = [], [], [], []
    for comp in components:
        start = len(exps)
        for idx, coef in comp:
            term = len(exps)
            exps.append(tuple(idx))
            const.append(coef.constant)
            for h in coef.harmonics:
                harmonics.append((term, h.frequency, h.kind == "sin", h.amplitude))
        slices.append(slice(start, len(exps)))
    exps = np.array(exps, dtype=np.int64).reshape(-1, dimension)
    dexps, dfac = [], []
    for j in range(dimension):
        dj = exps.copy()
        dj[:, j] = np.maximum(dj[:, j] - 1, 0)
        dexps.append(dj)
        dfac.append(exps[:, j].astype(float))
    return _Compiled(exps, tuple(slices), np.array(const, dtype=float), tuple(harmonics),
                     tuple(dexps), tuple(dfac))


@dataclass(frozen=True)
class PolyVectorField:
    """Polynomial vector field ``b(x, t)`` on R^d.

    Parameters
    ----------
    dimension : int
        State dimension d.
    components : sequence of length d
        Each entry is a mapping (or iterable of pairs) from exponent tuples to
        coefficients; a coefficient is a float or a :class:`TimeCoefficient`.
    """

    dimension: int
    components: tuple
    _c: _Compiled = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        d = int(self.dimension)
        if d < 1:
            raise ValueError("dimension must be positive")
        if len(self.components) != d:
            raise DimensionError(f"expected {d} components, got {len(self.components)}")
        comps = tuple(_canonical_component(c, d) for c in self.components)
        object.__setattr__(self, "dimension", d)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "_c", _compile(d, comps))

    @property
    def degree(self):
        return max((idx.order for comp in self.components for idx, _ in comp), default=0)

    @property
    def is_autonomous(self):
        return all(coef.is_constant for comp in self.components for _, coef in comp)

    def __add__(self, other):
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        if other.dimension != self.dimension:
            raise DimensionError("cannot add fields of different dimension")
        return PolyVectorField(
            self.dimension,
            [tuple(a) + tuple(b) for a, b in zip(self.components, other.components)],
        )

    # -- evaluation -------------------------------------------------------

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.dimension:
            raise DimensionError(
                f"state has shape {x.shape}, expected trailing dimension {self.dimension}"
            )
        return x

    def coefficients(self, t):
        """Term coefficients at time(s) ``t``; shape ``t.shape + (n_terms,)``."""
        t = np.asarray(t, dtype=float)
        c = np.broadcast_to(self._c.const, t.shape + self._c.const.shape).copy()
        for term, freq, is_sin, amp in self._c.harmonics:
            arg = freq * t
            c[..., term] += amp * (np.sin(arg) if is_sin else np.cos(arg))
        return c

    @staticmethod
    def _monomials(x, exps):
        return np.prod(x[..., None, :] ** exps, axis=-1)

    def _reduce(self, weighted, out_shape):
        out = np.zeros(out_shape)
        for i, sl in enumerate(self._c.slices):
            if sl.stop > sl.start:
                out[..., i] = np.sum(weighted[..., sl], axis=-1)
        return out

    def __call__(self, x, t=0.0):
        x = self._check(x)
        weighted = self._monomials(x, self._c.exps) * self.coefficients(t)
        return self._reduce(weighted, weighted.shape[:-1] + (self.dimension,))

    def _second(self):
        cached = self.__dict__.get("_second_cache")
        if cached is None:
            d = self.dimension
            exps = self._c.exps
            cached = {}
            for j in range(d):
                for l in range(j, d):
                    e = exps.copy()
                    fac = exps[:, j].astype(float)
                    e[:, j] = np.maximum(e[:, j] - 1, 0)
                    fac = fac * e[:, l]
                    e[:, l] = np.maximum(e[:, l] - 1, 0)
                    cached[j, l] = (e, fac)
            object.__setattr__(self, "_second_cache", cached)
        return cached

    def hessian(self, x, t=0.0):
        """Second derivatives ``d^2 b_i / dx_j dx_l``; shape ``(..., d, d, d)`` indexed ``[i, j, l]``."""
        x = self._check(x)
        coef = self.coefficients(t)
        d = self.dimension
        out = None
        for (j, l), (e, fac) in self._second().items():
            weighted = self._monomials(x, e) * (fac * coef)
            block = self._reduce(weighted, weighted.shape[:-1] + (d,))
            if out is None:
                out = np.zeros(block.shape[:-1] + (d, d, d))
            out[..., :, j, l] = block
            out[..., :, l, j] = block
        return out

    def jacobian(self, x, t=0.0):
        """Matrix of partial derivatives ``d b_i / d x_j``; shape ``(..., d, d)``."""
        x = self._check(x)
        coef = self.coefficients(t)
        d = self.dimension
        cols = []
        for j in range(d):
            weighted = self._monomials(x, self._c.dexps[j]) * (self._c.dfac[j] * coef)
            cols.append(self._reduce(weighted, weighted.shape[:-1] + (d,)))
        return np.stack(cols, axis=-1)


def zero_drift(dimension):
    return PolyVectorField(dimension, [{} for _ in range(dimension)])


def cubic_drift(a, b, A=0.0, omega=0.0, B=0.0, theta=0.0):
    """Drift ``a x^2 - b x + A sin(omega t) + B cos(theta t)`` of the cubic potential."""
    return PolyVectorField(1, [{
        (2,): a,
        (1,): -b,
        (0,): TimeCoefficient.forcing(A, omega, B, theta),
    }])


def double_well_drift(a, b, c=0.0, A=0.0, omega=0.0, B=0.0, theta=0.0):
    """Drift ``-a x^3 + b x + c + A sin(omega t) + B cos(theta t)`` of the tilted double well."""
    return PolyVectorField(1, [{
        (3,): -a,
        (1,): b,
        (0,): TimeCoefficient.forcing(A, omega, B, theta, constant=c),
    }])


def linear_drift(matrix, forcing=None):
    """``b(x, t) = M x + f(t)`` with ``f`` a sequence of time coefficients (or floats)."""
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    d = M.shape[0]
    if M.shape != (d, d):
        raise DimensionError("matrix must be square")
    if forcing is None:
        forcing = [0.0] * d
    if len(forcing) != d:
        raise DimensionError("forcing must have one entry per component")
    comps = []
    for i in range(d):
        terms = {tuple(int(k == j) for k in range(d)): M[i, j] for j in range(d)}
        terms[(0,) * d] = TimeCoefficient.coerce(forcing[i])
        comps.append(terms)
    return PolyVectorField(d, comps)


@dataclass(frozen=True)
class PolyDiffusionMatrix:
    """d x m diffusion matrix with polynomial entries, stored column by column.

    Column k is itself a :class:`PolyVectorField` whose i-th component is
    ``C[i, k]``; the generalized Jacobian of column k is then that field's
    Jacobian.
    """

    columns: tuple

    def __post_init__(self):
        cols = tuple(self.columns)
        if not cols:
            raise ValueError("diffusion matrix needs at least one column")
        d = cols[0].dimension
        if any(c.dimension != d for c in cols):
            raise DimensionError("all columns must share the state dimension")
        object.__setattr__(self, "columns", cols)

    @classmethod
    def constant_diagonal(cls, D, dimension):
        """``C = sqrt(D) I``: additive isotropic noise of intensity D."""
        s = float(np.sqrt(D))
        d = int(dimension)
        return cls(tuple(
            PolyVectorField(d, [{(0,) * d: s} if i == k else {} for i in range(d)])
            for k in range(d)
        ))

    @classmethod
    def from_entries(cls, dimension, entries):
        """Build from ``entries[i][k]``, each a term mapping as in :class:`PolyVectorField`."""
        d = int(dimension)
        if len(entries) != d:
            raise DimensionError(f"expected {d} rows")
        m = len(entries[0])
        return cls(tuple(PolyVectorField(d, [entries[i][k] for i in range(d)]) for k in range(m)))

    @property
    def dimension(self):
        return self.columns[0].dimension

    @property
    def n_noise(self):
        return len(self.columns)

    @property
    def is_state_independent(self):
        return all(col.degree == 0 for col in self.columns)

    def __call__(self, x, t=0.0):
        return np.stack([col(x, t) for col in self.columns], axis=-1)

    def column_jacobian(self, k, x, t=0.0):
        if not 0 <= k < self.n_noise:
            raise IndexError(f"column index {k} out of range for {self.n_noise} columns")
        return self.columns[k].jacobian(x, t)


# -- functional surface --------------------------------------------------


def eval_drift(field, x, t=0.0):
    return field(x, t)


def jacobian(field, lam, t=0.0):
    """Exact Jacobian of ``field`` at ``x = lam`` (exponent-drop rule, no finite differences)."""
    return field.jacobian(lam, t)


def generalized_jacobian(C, lam, t, k):
    """Derivatives of column ``k`` of ``C`` with respect to the state, at ``lam``.

    ``k`` counts from 1 here, matching the usual matrix notation; the
    :meth:`PolyDiffusionMatrix.column_jacobian` method is 0-based.
    """
    if not 1 <= k <= C.n_noise:
        raise IndexError(f"column {k} out of range 1..{C.n_noise}")
    return C.column_jacobian(k - 1, lam, t)


class ConfinementReport(NamedTuple):
    passed: bool
    worst_point: np.ndarray
    worst_margin: float


def confinement_check(field, gamma, radius, samples_per_axis=21, t=0.0):
    """Sample the growth condition ``<x, b(x,t)> <= gamma (1 + |x|^2)`` on a cube.

    The margin ``gamma (1 + |x|^2) - <x, b(x, t)>`` is evaluated on a uniform
    grid over ``[-radius, radius]^d``. This is a sampled diagnostic and proves
    nothing off the grid.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if samples_per_axis < 2:
        raise ValueError("samples_per_axis must be at least 2")
    axis = np.linspace(-radius, radius, int(samples_per_axis))
    mesh = np.meshgrid(*([axis] * field.dimension), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    margin = gamma * (1.0 + np.sum(pts * pts, axis=-1)) - np.sum(pts * field(pts, t), axis=-1)
    k = int(np.argmin(margin))
    return ConfinementReport(bool(margin[k] >= 0.0), pts[k].copy(), float(margin[k]))
