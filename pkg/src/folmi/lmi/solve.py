"""Feasibility solve of an :class:`LmiProblem` through cvxpy.

Strict constraints ``F(x) < 0`` are shifted to ``F(x) <= -eps * s I`` with
``s = max(1, ||F0||_max)``. The solve runs in two phases:

1. maximize a common shift ``t`` under a box ``|x|_inf <= box`` (``t <= 1``);
   ``t* >= eps`` gives a certificate with room to spare.
2. otherwise, fix the shift at ``eps`` and drop the box. A solver-reported
   infeasibility (dual ray) is the only route to ``Infeasible``; every other
   failure is ``Inconclusive``.

Every ``Feasible`` outcome has already passed :func:`verify` at ``0.9 * eps``.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from folmi.errors import MalformedProblemError
from folmi.lmi.problem import Certificate, verify

BACKENDS = {"clarabel": "CLARABEL", "scs": "SCS", "cvxopt": "CVXOPT"}
_ITER_KW = {"clarabel": "max_iter", "scs": "max_iters", "cvxopt": "max_iters"}


@dataclass
class SolveOptions:
    margin: float = 1e-6
    max_iter: int | None = None
    backend: str = "clarabel"
    box: float = 10.0
    verbose: bool = False


@dataclass
class Feasible:
    certificate: Certificate
    stats: dict = field(default_factory=dict)
    status: str = "feasible"

    @property
    def feasible(self):
        return True


@dataclass
class Infeasible:
    reason: str
    stats: dict = field(default_factory=dict)
    status: str = "infeasible"

    @property
    def feasible(self):
        return False


@dataclass
class Inconclusive:
    reason: str
    stats: dict = field(default_factory=dict)
    status: str = "inconclusive"

    @property
    def feasible(self):
        return False


def _build(problem, shift, box):
    import cvxpy as cp

    K = problem.n_unknowns
    x = cp.Variable(K)
    t = cp.Variable() if shift is None else None
    cons = []
    for con, F0, F in problem.scalarize():
        d = F0.shape[0]
        if d == 0:
            continue
        Fm = F.reshape(K, d * d).T
        E = cp.reshape(F0.ravel() + Fm @ x, (d, d), order="C")
        S = -E if con.negative else E
        S = 0.5 * (S + S.T)
        if con.strict:
            s = con.scale
            cons.append(S - (t * s if shift is None else shift * s) * np.eye(d) >> 0)
        else:
            cons.append(S >> 0)
    if box is not None:
        cons.append(cp.norm(x, "inf") <= box)
    if shift is None:
        cons.append(t <= 1.0)
        prob = cp.Problem(cp.Maximize(t), cons)
    else:
        prob = cp.Problem(cp.Minimize(0), cons)
    return prob, x, t


def _run(prob, opts):
    import cvxpy as cp

    kw = {}
    if opts.max_iter is not None:
        kw[_ITER_KW[opts.backend]] = int(opts.max_iter)
    try:
        with warnings.catch_warnings():
            # inaccurate solutions are caught by verify(), not by the warning
            warnings.simplefilter("ignore", UserWarning)
            prob.solve(solver=getattr(cp, BACKENDS[opts.backend]), verbose=opts.verbose, **kw)
    except cp.error.SolverError as exc:
        return "solver_error: " + str(exc).splitlines()[0] if str(exc) else "solver_error"
    return prob.status


def _iters(prob):
    try:
        return int(prob.solver_stats.num_iters or 0)
    except (AttributeError, TypeError):
        return 0


def _certify(problem, xval, opts, iters):
    values = problem.unpack(xval)
    cert = Certificate(values, 0.0, opts.backend, iters)
    rep = verify(problem, cert, margin=0.9 * opts.margin, tol=0.0)
    cert.margin = float(rep.min_normalized_slack)
    return cert, rep


def solve(problem, opts=None, **kw):
    """Decide feasibility; returns ``Feasible``, ``Infeasible`` or ``Inconclusive``.

    Keyword arguments override fields of ``opts``.
    """
    opts = opts or SolveOptions()
    for k, v in kw.items():
        setattr(opts, k, v)
    if opts.backend not in BACKENDS:
        raise MalformedProblemError(f"unknown backend {opts.backend!r}; choose from {sorted(BACKENDS)}")
    if not opts.margin > 0.0:
        raise MalformedProblemError("margin must be positive (strict inequalities)")
    stats = {"backend": opts.backend, **problem.summary()}
    t0 = time.perf_counter()

    if problem.n_unknowns == 0:
        cert, rep = _certify(problem, np.zeros(0), opts, 0)
        stats["solve_time"] = time.perf_counter() - t0
        if rep.passed:
            return Feasible(cert, stats)
        return Infeasible("constant constraints violated", stats)

    prob, x, t = _build(problem, None, opts.box)
    status1 = _run(prob, opts)
    stats["phase1_status"] = status1
    iters = _iters(prob)
    if status1 in ("optimal", "optimal_inaccurate") and t.value is not None:
        stats["phase1_t"] = float(t.value)
        if t.value >= opts.margin:
            cert, rep = _certify(problem, x.value, opts, iters)
            if rep.passed:
                stats["solve_time"] = time.perf_counter() - t0
                return Feasible(cert, stats)

    prob2, x2, _ = _build(problem, opts.margin, None)
    status2 = _run(prob2, opts)
    stats["phase2_status"] = status2
    stats["solve_time"] = time.perf_counter() - t0
    iters += _iters(prob2)
    if status2 == "infeasible":
        return Infeasible(f"{opts.backend} reports the {opts.margin:g}-shifted problem infeasible", stats)
    if status2 in ("optimal", "optimal_inaccurate") and x2.value is not None:
        cert, rep = _certify(problem, x2.value, opts, iters)
        if rep.passed:
            return Feasible(cert, stats)
        worst = min(rep.failing(), key=lambda c: c.slack - c.required)
        return Inconclusive(f"solver point fails verification at {worst.name} (slack {worst.slack:.3e})", stats)
    return Inconclusive(f"solver status {status2}", stats)
