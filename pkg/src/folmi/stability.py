"""Delay-dependent stability LMIs and the eigenvalue sector diagnostic.

Both tests work on the state-delay form ``D^a x = A x + B x(t - d(t))`` with
``0 <= d(t) <= tau`` and ``d'(t) <= mu < 1``. The certain-system test uses the
free-weighting matrix inequality ``Gamma < 0`` in ``P > 0, Q >= 0, Z > 0``,
``N_1..N_3`` and ``T_1..T_3``; the interval test adds a scalar ``eta > 0`` and
borders the centre problem with the rank-one uncertainty factors.

Feasibility only ever proves stability. There is no "unstable" verdict.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from folmi.errors import DimensionError, IntervalError
from folmi.interval import IntervalMatrix, UncertaintyFactors, build_factors, certain_factors, vertex_samples
from folmi.linalg import as_mat, gen_eig
from folmi.lmi import AffineMatrixExpr, LmiProblem, SolveOptions, as_expr, block, solve, verify

VERDICTS = ("certified_stable", "unknown")


@dataclass(frozen=True)
class DelayedPair:
    """Non-delayed coefficient ``a`` and delayed-state coefficient ``b`` (both n x n)."""

    a: object
    b: object

    def __post_init__(self):
        sa = self.a.shape if isinstance(self.a, (IntervalMatrix, UncertaintyFactors)) else as_mat(self.a).shape
        sb = self.b.shape if isinstance(self.b, (IntervalMatrix, UncertaintyFactors)) else as_mat(self.b).shape
        if sa[0] != sa[1] or sa != sb:
            raise DimensionError(f"delayed pair needs two n x n matrices, got {sa} and {sb}")

    @property
    def n(self):
        return self.a.shape[0] if hasattr(self.a, "shape") else as_mat(self.a).shape[0]

    @staticmethod
    def _factors(m):
        if isinstance(m, UncertaintyFactors):
            return m
        if isinstance(m, IntervalMatrix):
            return build_factors(m)
        return certain_factors(m)

    def factors(self):
        return self._factors(self.a), self._factors(self.b)


@dataclass
class StabilityReport:
    verdict: str
    certificate: object = None
    problem_stats: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    verify_report: object = None
    reason: str = ""

    @property
    def certified(self):
        return self.verdict == "certified_stable"


def _check_delay(tau, mu):
    if not (tau > 0.0 and math.isfinite(tau)):
        raise IntervalError(f"tau must be positive, got {tau}")
    if not mu < 1.0:
        raise IntervalError(f"mu must be < 1, got {mu}")


def _declare_lk(prob, n):
    """Lyapunov-Krasovskii and free-weighting variables, in declaration order."""
    v = {}
    v["P"] = prob.declare_var("P", "symmetric", n, "positive_definite")
    v["Q"] = prob.declare_var("Q", "symmetric", n, "positive_semidefinite")
    v["Z"] = prob.declare_var("Z", "symmetric", n, "positive_definite")
    for i in (1, 2, 3):
        v[f"T{i}"] = prob.declare_var(f"T{i}", "rectangular", (n, n))
    for i in (1, 2, 3):
        v[f"N{i}"] = prob.declare_var(f"N{i}", "rectangular", (n, n))
    return {k: as_expr(x) for k, x in v.items()}


def structure_block(v, tau, mu):
    """The part of ``Gamma`` that does not involve the system matrices."""
    P, Q, Z = v["P"], v["Q"], v["Z"]
    N1, N2, N3 = v["N1"], v["N2"], v["N3"]
    T1, T2, T3 = v["T1"], v["T2"], v["T3"]
    g11 = Q + N1 + N1.T
    g12 = N2.T - N1
    g13 = P + N3.T + T1
    g22 = -(1.0 - mu) * Q - N2 - N2.T
    g23 = -N3.T + T2
    g33 = tau * Z + T3 + T3.T
    return block(
        [
            [g11, g12, g13, tau * N1],
            [g12.T, g22, g23, tau * N2],
            [g13.T, g23.T, g33, tau * N3],
            [tau * N1.T, tau * N2.T, tau * N3.T, -tau * Z],
        ]
    )


def sym_rows(pairs, n):
    """``sym`` of the block rows ``[-x_i, -y_i, 0, 0]`` (i = 1..3) over a zero fourth row."""
    rows = [[-x, -y, None, None] for x, y in pairs]
    rows.append([None, None, None, None])
    g = block(rows, row_sizes=[n] * 4, col_sizes=[n] * 4)
    return g + g.T


def gain_block(v, a, b):
    """``sym`` of the block rows ``[-T_i a, -T_i b, 0, 0]``, i = 1..3."""
    return sym_rows([(v[f"T{i}"] @ a, v[f"T{i}"] @ b) for i in (1, 2, 3)], a.shape[0])


def assemble_certain(pair, tau, mu):
    """Free-weighting LMI ``Gamma < 0`` (size 4n) for fixed ``a``, ``b``."""
    _check_delay(tau, mu)
    a = as_mat(pair.a, "a")
    b = as_mat(pair.b, "b")
    n = a.shape[0]
    prob = LmiProblem("certain")
    v = _declare_lk(prob, n)
    gamma = structure_block(v, tau, mu) + gain_block(v, a, b)
    prob.add_constraint(gamma, "negdef", "Gamma")
    prob.meta.update(kind="certain", n=n, tau=tau, mu=mu)
    return prob


def assemble_interval(a_uf, b_uf, tau, mu):
    """Robust LMI for ``a = A0 + M_A F_A R_A``, ``b = B0 + M_B F_B R_B``, ``||F|| <= 1``.

    The single constraint, of size ``4n + ka + kb`` (``ka``, ``kb`` the slot
    counts), is::

        [ phi + eta diag(R_A^T R_A, R_B^T R_B, 0, 0)   Mt     ]
        [ Mt^T                                         -eta I ] < 0

    with ``phi = structure + sym{rows i: [-T_i A0, -T_i B0, 0, 0]}`` and ``Mt``
    the block rows ``[-T_i M_A, -T_i M_B]`` (i = 1..3) over a zero fourth row.
    """
    _check_delay(tau, mu)
    n = a_uf.shape[0]
    if a_uf.shape != (n, n) or b_uf.shape != (n, n):
        raise DimensionError(f"factor shapes {a_uf.shape} and {b_uf.shape} are not both {n} x {n}")
    ka, kb = a_uf.n_slots, b_uf.n_slots
    prob = LmiProblem("interval")
    v = _declare_lk(prob, n)
    eta = prob.declare_var("eta", "scalar", cone="positive_scalar")
    phi = structure_block(v, tau, mu) + gain_block(v, a_uf.center, b_uf.center)
    rr = np.zeros((4 * n, 4 * n))
    rr[:n, :n] = a_uf.r_factor.T @ a_uf.r_factor
    rr[n : 2 * n, n : 2 * n] = b_uf.r_factor.T @ b_uf.r_factor
    phi = phi + _scaled_eta(eta, rr)
    mt = block(
        [[-(v[f"T{i}"] @ a_uf.m_factor), -(v[f"T{i}"] @ b_uf.m_factor)] for i in (1, 2, 3)] + [[None, None]],
        row_sizes=[n] * 4,
        col_sizes=[ka, kb],
    )
    big = block([[phi, mt], [mt.T, _scaled_eta(eta, -np.eye(ka + kb))]])
    prob.add_constraint(big, "negdef", "robust")
    prob.meta.update(kind="interval", n=n, tau=tau, mu=mu, ka=ka, kb=kb)
    return prob


def _scaled_eta(eta, m):
    return AffineMatrixExpr.scalar_times(eta, m)


def _analyze(prob, opts, extra_warnings=()):
    opts = opts or SolveOptions()
    t0 = time.perf_counter()
    res = solve(prob, opts)
    stats = dict(res.stats)
    stats["wall_time"] = time.perf_counter() - t0
    warns = list(extra_warnings)
    if res.feasible:
        rep = verify(prob, res.certificate, margin=0.9 * opts.margin, tol=0.0)
        if rep.passed:
            return StabilityReport("certified_stable", res.certificate, stats, warns, rep, "")
        warns.append("solver certificate failed independent verification")
        return StabilityReport("unknown", None, stats, warns, rep, "verification failed")
    return StabilityReport("unknown", None, stats, warns, None, f"{res.status}: {res.reason}")


def analyze_certain(pair, tau, mu, opts=None):
    """Solve and verify :func:`assemble_certain`."""
    return _analyze(assemble_certain(pair, tau, mu), opts)


def analyze_interval(a_uf, b_uf, tau, mu, opts=None):
    """Solve and verify :func:`assemble_interval`."""
    return _analyze(assemble_interval(a_uf, b_uf, tau, mu), opts)


def analyze_pair(pair, tau, mu, opts=None):
    """Robust test on a :class:`DelayedPair` of intervals (or point matrices)."""
    a_uf, b_uf = pair.factors()
    return analyze_interval(a_uf, b_uf, tau, mu, opts)


@dataclass
class SectorSample:
    spectrum: np.ndarray
    margins: np.ndarray
    worst_margin: float


def sector_margins(lam, alpha):
    """``|arg(lambda)| - alpha pi / 2`` for each eigenvalue."""
    return np.abs(np.angle(lam)) - alpha * math.pi / 2.0


def sector_scan(a_int, alpha, count, seed=0):
    """Eigenvalue sector margins of seeded members of an interval matrix.

    This looks at the non-delayed matrix only; it is a diagnostic, not a
    delay-aware proof. ``a_int`` may also be :class:`UncertaintyFactors`
    (e.g. a closed loop from :func:`folmi.synthesis.close_loop`).
    """
    if not (0.0 < alpha < 1.0):
        raise IntervalError(f"alpha must lie in (0, 1), got {alpha}")
    uf = a_int if isinstance(a_int, UncertaintyFactors) else build_factors(a_int)
    if uf.shape[0] != uf.shape[1]:
        raise DimensionError(f"sector scan needs a square matrix, got {uf.shape}")
    out = []
    for m in vertex_samples(uf, count, seed):
        lam = gen_eig(m)
        mar = sector_margins(lam, alpha)
        out.append(SectorSample(lam, mar, float(mar.min())))
    return out


def sector_csv(samples, alpha=None):
    """CSV text ``sample_id,eig_index,re,im,arg,margin`` (12 significant digits).

    With ``alpha`` given, a leading ``# alpha=...,boundary=...`` line records
    the sector.
    """
    buf = io.StringIO()
    if alpha is not None:
        buf.write(f"# alpha={alpha:.12g},boundary={alpha * math.pi / 2.0:.12g}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_id", "eig_index", "re", "im", "arg", "margin"])
    for sid, s in enumerate(samples):
        for k, (lam, mar) in enumerate(zip(s.spectrum, s.margins)):
            w.writerow([sid, k, f"{lam.real:.12g}", f"{lam.imag:.12g}", f"{np.angle(lam):.12g}", f"{mar:.12g}"])
    return buf.getvalue()
