"""Interval matrices, their center/radius split and rank-one M/R factors.

An interval matrix ``[lower, upper]`` is written as ``center + M diag(delta) R``
with one slot per entry. Slots are ordered row-major, ``(i, j)`` with ``i``
outer and ``j`` inner, and zero-radius slots are kept so the shapes are always
``n x (n*c)`` and ``(n*c) x c``. Certificates depend on this order.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from folmi.errors import DimensionError, IntervalError
from folmi.linalg import as_mat


@dataclass(frozen=True)
class IntervalMatrix:
    """Entrywise bounds ``lower <= A <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_mat(self.lower, "lower")
        up = as_mat(self.upper, "upper")
        if lo.shape != up.shape:
            raise DimensionError(f"lower {lo.shape} and upper {up.shape} differ in shape")
        bad = np.argwhere(lo > up)
        if bad.size:
            i, j = bad[0]
            raise IntervalError(f"lower[{i}][{j}] = {lo[i, j]} exceeds upper[{i}][{j}] = {up[i, j]}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @classmethod
    def certain(cls, m):
        m = as_mat(m)
        return cls(m, m.copy())

    @property
    def shape(self):
        return self.lower.shape

    @property
    def is_degenerate(self):
        return bool(np.all(self.lower == self.upper))

    def contains(self, m, tol=0.0):
        m = np.asarray(m, dtype=float)
        return bool(np.all(m >= self.lower - tol) and np.all(m <= self.upper + tol))


@dataclass(frozen=True)
class UncertaintyFactors:
    """Center, radius and the rank-one factors ``m_factor @ r_factor == radius``."""

    center: np.ndarray
    radius: np.ndarray
    m_factor: np.ndarray
    r_factor: np.ndarray

    @property
    def shape(self):
        return self.center.shape

    @property
    def n_slots(self):
        return self.m_factor.shape[1]

    def hull(self):
        """Smallest interval matrix holding every ``center + M diag(d) R``, ``|d| <= 1``."""
        rad = np.abs(self.m_factor) @ np.abs(self.r_factor)
        return IntervalMatrix(self.center - rad, self.center + rad)


def decompose(im):
    """Return ``(center, radius)`` of an interval matrix."""
    center = 0.5 * (im.lower + im.upper)
    radius = 0.5 * (im.upper - im.lower)
    return center, radius


def build_factors(im):
    """Center, radius and M/R factors of an interval matrix.

    Column ``(i, j)`` of ``m_factor`` is ``sqrt(radius_ij) e_i`` and row
    ``(i, j)`` of ``r_factor`` is ``sqrt(radius_ij) e_j^T``.
    """
    center, radius = decompose(im)
    n, c = radius.shape
    m_factor = np.zeros((n, n * c))
    r_factor = np.zeros((n * c, c))
    for i in range(n):
        for j in range(c):
            k = i * c + j
            s = math.sqrt(radius[i, j])
            m_factor[i, k] = s
            r_factor[k, j] = s
    return UncertaintyFactors(center, radius, m_factor, r_factor)


def certain_factors(m):
    """Factors of a point matrix (all radii zero)."""
    return build_factors(IntervalMatrix.certain(m))


def sample_member(uf, deltas):
    """``center + M diag(deltas) R`` for ``deltas`` in ``[-1, 1]``."""
    d = np.asarray(deltas, dtype=float).ravel()
    if d.shape[0] != uf.n_slots:
        raise DimensionError(f"expected {uf.n_slots} deltas, got {d.shape[0]}")
    if np.any(np.abs(d) > 1.0) or not np.all(np.isfinite(d)):
        raise IntervalError("deltas must lie in [-1, 1]")
    return uf.center + (uf.m_factor * d) @ uf.r_factor


def _vertex_patterns(k, want, rng):
    """Up to ``want`` distinct sign patterns of length ``k``, all +1 and all -1 first."""
    if k == 0:
        return [np.zeros(0)]
    out = [np.ones(k), -np.ones(k)][: max(want, 1)]
    if 2**k <= want:
        for bits in itertools.product((1.0, -1.0), repeat=k):
            p = np.array(bits)
            if not any(np.array_equal(p, q) for q in out):
                out.append(p)
        return out
    seen = {tuple(p) for p in out}
    tries = 0
    while len(out) < want and tries < 50 * want:
        p = rng.choice((-1.0, 1.0), size=k)
        tries += 1
        if tuple(p) not in seen:
            seen.add(tuple(p))
            out.append(p)
    return out


def vertex_samples(uf, count, seed=0):
    """Seeded interval members: vertices first, then uniform random deltas.

    About half of ``count`` (rounded up) are sign patterns on the nonzero-radius
    slots; when the interval has few enough vertices all of them are listed.
    The remainder draw deltas uniformly from ``[-1, 1]``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    active = np.flatnonzero(np.abs(uf.m_factor).sum(axis=0) > 0.0)
    k = active.size
    if k == 0:
        return [uf.center.copy() for _ in range(count)]
    n_vert = min((count + 1) // 2, 2**k) if k < 63 else (count + 1) // 2
    patterns = _vertex_patterns(k, n_vert, rng)
    out = []
    for p in patterns:
        d = np.zeros(uf.n_slots)
        d[active] = p
        out.append(sample_member(uf, d))
    while len(out) < count:
        d = np.zeros(uf.n_slots)
        d[active] = rng.uniform(-1.0, 1.0, size=k)
        out.append(sample_member(uf, d))
    return out[:count]


@dataclass(frozen=True)
class DelaySpec:
    """Time-varying delay ``0 <= d(t) <= tau`` with ``d'(t) <= mu < 1``.

    ``form`` is one of ``"constant"`` (uses ``value``), ``"sin_exp"``
    (``d(t) = a (sin t + 1)(1 - exp(-t))``) or ``"table"`` (``table`` is a list
    of ``(t, d)`` pairs interpolated linearly, clamped to ``[0, tau]``).
    """

    tau: float
    mu: float = 0.0
    form: str = "constant"
    value: float | None = None
    a: float | None = None
    table: tuple = field(default=())

    def __post_init__(self):
        if not (math.isfinite(self.tau) and math.isfinite(self.mu)):
            raise IntervalError("tau and mu must be finite")
        if self.tau < 0.0:
            raise IntervalError(f"tau must be >= 0, got {self.tau}")
        if self.mu >= 1.0:
            raise IntervalError(f"mu must be < 1, got {self.mu}")
        if self.form == "constant":
            v = self.tau if self.value is None else float(self.value)
            if v < 0.0 or v > self.tau:
                raise IntervalError(f"constant delay {v} outside [0, tau={self.tau}]")
            object.__setattr__(self, "value", v)
        elif self.form == "sin_exp":
            if self.a is None or self.a < 0.0:
                raise IntervalError("sin_exp delay needs a >= 0")
        elif self.form == "table":
            tab = tuple((float(t), float(d)) for t, d in self.table)
            if not tab:
                raise IntervalError("table delay needs at least one sample")
            ts = [t for t, _ in tab]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise IntervalError("table times must be strictly increasing")
            object.__setattr__(self, "table", tab)
        else:
            raise IntervalError(f"unknown delay form {self.form!r}")

    def d(self, t):
        """Delay at time(s) ``t >= 0``."""
        t = np.asarray(t, dtype=float)
        if self.form == "constant":
            return np.full_like(t, self.value)
        if self.form == "sin_exp":
            return self.a * (np.sin(t) + 1.0) * (1.0 - np.exp(-t))
        ts = np.array([p[0] for p in self.table])
        ds = np.array([p[1] for p in self.table])
        return np.clip(np.interp(t, ts, ds), 0.0, self.tau)

    def bounds(self, horizon=60.0, points=60001):
        """Numerical ``(sup d, sup d')`` over ``[0, horizon]``."""
        if self.form == "constant":
            return self.value, 0.0
        if self.form == "sin_exp":
            # sin t + 1 <= 2 and 1 - e^-t < 1, so the supremum is 2a (not attained)
            t = np.linspace(0.0, horizon, points)
            dd = self.a * (np.cos(t) * (1.0 - np.exp(-t)) + (np.sin(t) + 1.0) * np.exp(-t))
            return 2.0 * self.a, float(dd.max())
        ts = np.array([p[0] for p in self.table])
        ds = np.clip(np.array([p[1] for p in self.table]), 0.0, self.tau)
        slope = float(np.max(np.diff(ds) / np.diff(ts))) if ts.size > 1 else 0.0
        return float(ds.max()), max(slope, 0.0)

    def validation_warnings(self):
        """Messages for delay profiles that exceed the declared ``tau`` or ``mu``."""
        out = []
        sup_d, sup_dd = self.bounds()
        if sup_d > self.tau + 1e-12:
            out.append(f"delay profile reaches {sup_d:.4g} > tau = {self.tau:.4g}")
        if sup_dd > self.mu + 1e-12:
            out.append(f"delay rate reaches {sup_dd:.4g} > mu = {self.mu:.4g}")
        if self.form == "table":
            raw = max(p[1] for p in self.table)
            if raw > self.tau:
                out.append(f"table samples up to {raw:.4g} clamped to tau = {self.tau:.4g}")
        return out

    def warn(self):
        for msg in self.validation_warnings():
            warnings.warn(msg, stacklevel=2)


@dataclass(frozen=True)
class FoSystem:
    """``D^alpha x = A x + B u(t - d(t))``, ``y = C x`` with interval ``A``, ``B``."""

    alpha: float
    a_int: IntervalMatrix
    b_int: IntervalMatrix
    c_out: np.ndarray
    delay: DelaySpec

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise IntervalError(f"alpha must lie in (0, 1), got {self.alpha}")
        n, n2 = self.a_int.shape
        if n != n2:
            raise DimensionError(f"A must be square, got {self.a_int.shape}")
        if self.b_int.shape[0] != n:
            raise DimensionError(f"B has {self.b_int.shape[0]} rows, A has {n}")
        c = as_mat(self.c_out, "C")
        if self.c_out is not None and np.ndim(self.c_out) == 1:
            c = c.reshape(1, -1)
        if c.shape[1] != n:
            raise DimensionError(f"C has {c.shape[1]} columns, A has {n}")
        object.__setattr__(self, "c_out", c)

    @property
    def n(self):
        return self.a_int.shape[0]

    @property
    def n_inputs(self):
        return self.b_int.shape[1]

    @property
    def n_outputs(self):
        return self.c_out.shape[0]

    def factors(self):
        return build_factors(self.a_int), build_factors(self.b_int)
