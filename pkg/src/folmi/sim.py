"""Grünwald-Letnikov simulation of Caputo fractional delay systems.

The scheme applies the GL difference to ``x - x0``::

    h^-a sum_{j=0..k} c_j (x_{k-j} - x0) = A x_k + A_d x(t_k - d(t_k))

with the non-delayed term implicit and the delayed term linearly interpolated
from already computed states (or from the initial function for arguments in
``[-tau, 0]``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from folmi import kernels
from folmi.errors import DimensionError, StepFailure
from folmi.linalg import as_mat
from folmi.synthesis import closed_loop_matrices


def gl_coeffs(alpha, count):
    """First ``count`` GL weights: ``c_0 = 1``, ``c_j = (1 - (1 + alpha)/j) c_{j-1}``."""
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    count = int(count)
    if count < 1:
        raise ValueError("count must be >= 1")
    c = np.empty(count)
    c[0] = 1.0
    for j in range(1, count):
        c[j] = (1.0 - (1.0 + alpha) / j) * c[j - 1]
    return c


@dataclass(frozen=True)
class History:
    """Initial function on ``[-tau, 0]``: a constant vector or a sample table.

    Tables are interpolated linearly per component and held constant outside
    their sample range.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v.reshape(1, -1)
        if t.size != v.shape[0] or t.size == 0:
            raise DimensionError(f"history has {t.size} times and {v.shape[0]} samples")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("history times must be strictly increasing")
        if np.any(t > 0.0):
            raise ValueError("history times must lie in [-tau, 0]")
        if not np.all(np.isfinite(v)):
            raise ValueError("history values must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, v):
        return cls(np.zeros(1), np.asarray(v, dtype=float).reshape(1, -1))

    @property
    def n(self):
        return self.values.shape[1]

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.column_stack([np.interp(t, self.times, self.values[:, i]) for i in range(self.n)])

    def padded(self, n):
        """The same history with zero components appended up to dimension ``n``."""
        if n < self.n:
            raise DimensionError(f"cannot pad a {self.n}-dimensional history to {n}")
        extra = np.zeros((self.values.shape[0], n - self.n))
        return History(self.times, np.hstack([self.values, extra]))


@dataclass
class SimConfig:
    step_h: float = 0.01
    horizon_t: float = 50.0
    memory_len: object = "full"
    history: object = None

    def __post_init__(self):
        if not (self.step_h > 0.0 and math.isfinite(self.step_h)):
            raise ValueError(f"step_h must be positive, got {self.step_h}")
        if not (self.horizon_t > 0.0 and math.isfinite(self.horizon_t)):
            raise ValueError(f"horizon_t must be positive, got {self.horizon_t}")
        if self.memory_len != "full" and int(self.memory_len) < 1:
            raise ValueError("memory_len must be 'full' or a positive integer")
        if self.history is not None and not isinstance(self.history, History):
            self.history = History.constant(self.history)

    @property
    def steps(self):
        return int(round(self.horizon_t / self.step_h))


@dataclass
class Trace:
    times: np.ndarray
    states: np.ndarray
    norm_series: np.ndarray
    diverged: bool = False
    last_step: int = 0
    meta: dict = field(default_factory=dict)

    def to_csv(self):
        """``t,x1,..,xn,norm`` with 12 significant digits."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.states.shape[1]
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + ["norm"])
        for t, x, r in zip(self.times, self.states, self.norm_series):
            w.writerow([f"{t:.12g}"] + [f"{v:.12g}" for v in x] + [f"{r:.12g}"])
        return buf.getvalue()


def simulate(a, a_d, delay, alpha, cfg):
    """March ``D^alpha x = a x + a_d x(t - d(t))`` from ``cfg.history``.

    Raises
    ------
    StepFailure
        ``I - h^alpha a`` is singular (reported at step 1, where it is first needed).
    ValueError
        ``step_h`` exceeds ``tau`` or no history was given.
    """
    a = as_mat(a, "a")
    a_d = as_mat(a_d, "a_d")
    n = a.shape[0]
    if a.shape != (n, n) or a_d.shape != (n, n):
        raise DimensionError(f"a and a_d must both be square of one size, got {a.shape} and {a_d.shape}")
    if cfg.history is None:
        raise ValueError("SimConfig.history is required")
    if cfg.history.n != n:
        raise DimensionError(f"history has dimension {cfg.history.n}, system has {n}")
    h = cfg.step_h
    if delay.tau > 0.0 and h > delay.tau:
        raise ValueError(f"step_h = {h} exceeds tau = {delay.tau}; the delay must span a step")
    steps = cfg.steps
    ha = h**alpha
    step_mat = np.eye(n) - ha * a
    try:
        solve_mat = np.linalg.solve(step_mat, np.eye(n))
    except np.linalg.LinAlgError:
        raise StepFailure("I - h^alpha a is singular", 1) from None
    if np.linalg.cond(step_mat) > 1e14:
        raise StepFailure("I - h^alpha a is numerically singular", 1)
    coeffs = gl_coeffs(alpha, steps + 1)
    times = h * np.arange(steps + 1)
    targ = times - delay.d(times)
    pos = targ / h
    hist = cfg.history(np.minimum(targ, 0.0))
    x0 = cfg.history(0.0)[0]
    memory = steps if cfg.memory_len == "full" else int(cfg.memory_len)
    limit = 1e6 * (1.0 + float(np.linalg.norm(x0)))
    xs, last, diverged = kernels.gl_march(
        solve_mat, np.ascontiguousarray(ha * a_d), coeffs, x0.copy(), np.ascontiguousarray(pos), hist, memory, limit
    )
    xs = np.asarray(xs)
    return Trace(times[: last + 1], xs, np.linalg.norm(xs, axis=1), bool(diverged), int(last))


def simulate_closed_loop(a, b, c_out, k, delay, alpha, cfg):
    """Simulate a sampled plant ``(a, b)`` under controller ``k``.

    A plant-sized history is padded with zero controller states.
    """
    a_cl, a_dcl = closed_loop_matrices(a, b, c_out, k)
    n = a_cl.shape[0]
    if cfg.history is not None and cfg.history.n < n:
        cfg = SimConfig(cfg.step_h, cfg.horizon_t, cfg.memory_len, cfg.history.padded(n))
    return simulate(a_cl, a_dcl, delay, alpha, cfg)


def envelope_nonincreasing(trace, start_frac=0.5, window=None):
    """Whether the norm envelope is non-increasing after ``start_frac`` of the horizon.

    The envelope is the norm maximum over consecutive windows of ``window``
    samples (default: a tenth of the tail); each window peak must not exceed
    the previous one.
    """
    r = trace.norm_series
    k0 = int(len(r) * start_frac)
    tail = r[k0:]
    if window is None:
        window = max(1, len(tail) // 10)
    peaks = [tail[i : i + window].max() for i in range(0, len(tail), window)]
    return all(q <= p + 1e-12 for p, q in zip(peaks, peaks[1:]))
