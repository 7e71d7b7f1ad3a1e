"""Fixed-order dynamic output feedback for interval plants with input delay.

Controller::

    D^a x_c = A_c x_c + B_c y,    u = C_c x_c + D_c y,    y = C x

Closing the loop around ``D^a x = A x + B u(t - d(t))`` gives the state-delay
pair ``(A_cl, A_dcl)`` on ``[x; x_c]``::

    A_cl  = [[A, 0], [B_c C, A_c]]      A_dcl = [[B D_c C, B C_c], [0, 0]]

Synthesis uses one block-diagonal multiplier ``T = diag(T_S, T_C)`` shared by
the three free-weighting rows and the products ``X = A_cl T``, ``Y = A_dcl T``:

    X = [[A0 T_S, 0], [W2, W1]]        Y = [[B0 W4, B0 W3], [0, 0]]
    W1 = A_c T_C,  W2 = B_c C T_S,  W3 = C_c T_C,  W4 = D_c C T_S

so the gain block is ``sym{rows i: [-X, -Y, 0, 0]}``. Plant uncertainty
enters as ``sym{E diag(F_A, F_B) G}`` with constant ``E`` and ``G`` affine in
``T_S, W3, W4``; one Schur border against ``-eta I`` keeps it linear.

The coupling ``W2 = B_c C T_S`` (likewise ``W4``) is bilinear, so the outer
loop alternates: a relaxed start (``W2``, ``W4`` free), gain steps (``T_S``
fixed, ``B_c``, ``D_c`` direct) and, when a gain step fails, Lyapunov steps
(``B_c``, ``D_c`` fixed, ``T_S`` free). Whatever happens, a controller is only
returned after the robust analysis certifies its closed loop.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from folmi.errors import DimensionError, NoFeasibleIterate, PostValidationFailure, RecoveryFailure
from folmi.interval import UncertaintyFactors
from folmi.linalg import as_mat, max_norm, pinv, sym_eig
from folmi.lmi import AffineMatrixExpr, LmiProblem, SolveOptions, as_expr, block, solve
from folmi.stability import analyze_interval, structure_block, sym_rows


def _empty(r, c):
    return np.zeros((r, c))


@dataclass(frozen=True)
class Controller:
    """``(A_c, B_c, C_c, D_c)``; ``n_c = 0`` is static output feedback ``u = D_c y``."""

    a_c: np.ndarray
    b_c: np.ndarray
    c_c: np.ndarray
    d_c: np.ndarray

    def __post_init__(self):
        d = as_mat(self.d_c, "D_c")
        l, m = d.shape
        a = np.asarray(self.a_c, dtype=float).reshape(-1)
        nc = int(round(np.sqrt(a.size)))
        if nc * nc != a.size:
            raise DimensionError(f"A_c has {a.size} entries, not a square count")
        a = a.reshape(nc, nc)
        b = np.asarray(self.b_c, dtype=float).reshape(nc, m) if nc else _empty(0, m)
        c = np.asarray(self.c_c, dtype=float).reshape(l, nc) if nc else _empty(l, 0)
        for name, x in (("A_c", a), ("B_c", b), ("C_c", c), ("D_c", d)):
            if not np.all(np.isfinite(x)):
                raise ValueError(f"{name} has non-finite entries")
        object.__setattr__(self, "a_c", a)
        object.__setattr__(self, "b_c", b)
        object.__setattr__(self, "c_c", c)
        object.__setattr__(self, "d_c", d)

    @classmethod
    def static(cls, d_c):
        d = as_mat(d_c, "D_c")
        return cls(_empty(0, 0), _empty(0, d.shape[1]), _empty(d.shape[0], 0), d)

    @property
    def n_c(self):
        return self.a_c.shape[0]

    def params(self):
        return np.concatenate([self.a_c.ravel(), self.b_c.ravel(), self.c_c.ravel(), self.d_c.ravel()])

    def to_json(self):
        def mat(x):
            return x.tolist() if x.size else []

        return {"n_c": self.n_c, "A_c": mat(self.a_c), "B_c": mat(self.b_c), "C_c": mat(self.c_c), "D_c": mat(self.d_c)}

    def dumps(self):
        return json.dumps(self.to_json(), indent=2) + "\n"

    @classmethod
    def from_json(cls, doc):
        d = as_mat(doc["D_c"], "D_c")
        l, m = d.shape
        nc = int(doc.get("n_c", 0))

        def mat(key, shape):
            x = np.array(doc.get(key, []), dtype=float)
            if x.size == 0:
                if shape[0] * shape[1]:
                    raise DimensionError(f"{key} is empty but n_c = {nc}")
                return _empty(*shape)
            if x.ndim < 2:
                x = x.reshape(shape)
            if x.shape != shape:
                raise DimensionError(f"{key} has shape {x.shape}, expected {shape}")
            return x

        return cls(mat("A_c", (nc, nc)), mat("B_c", (nc, m)), mat("C_c", (l, nc)), d)


def closed_loop_matrices(a, b, c, k):
    """Point closed loop ``(A_cl, A_dcl)`` for member matrices ``a``, ``b``."""
    a, b, c = as_mat(a), as_mat(b), as_mat(c)
    n, nc = a.shape[0], k.n_c
    if b.shape[1] != k.d_c.shape[0] or c.shape[0] != k.d_c.shape[1]:
        raise DimensionError(f"controller D_c {k.d_c.shape} does not fit B {b.shape} and C {c.shape}")
    a_cl = np.zeros((n + nc, n + nc))
    a_cl[:n, :n] = a
    a_cl[n:, :n] = k.b_c @ c
    a_cl[n:, n:] = k.a_c
    a_dcl = np.zeros((n + nc, n + nc))
    a_dcl[:n, :n] = b @ k.d_c @ c
    a_dcl[:n, n:] = b @ k.c_c
    return a_cl, a_dcl


def close_loop(sys, k):
    """Closed-loop factors ``(a_cl, a_dcl)`` of an interval plant and a controller.

    ``a_cl`` has factors ``[M_A; 0]``, ``[R_A, 0]``; ``a_dcl`` has
    ``[M_B; 0]``, ``[R_B D_c C, R_B C_c]``. Radii are the hulls
    ``|M| |R|``, so the factor identity ``M R = radius`` need not hold here.
    """
    a_uf, b_uf = sys.factors()
    c = sys.c_out
    nc = k.n_c
    if k.d_c.shape != (sys.n_inputs, sys.n_outputs):
        raise DimensionError(f"D_c must be {sys.n_inputs} x {sys.n_outputs}, got {k.d_c.shape}")
    a0cl, a0dcl = closed_loop_matrices(a_uf.center, b_uf.center, c, k)
    ka, kb = a_uf.n_slots, b_uf.n_slots
    m_a = np.vstack([a_uf.m_factor, np.zeros((nc, ka))])
    r_a = np.hstack([a_uf.r_factor, np.zeros((ka, nc))])
    m_b = np.vstack([b_uf.m_factor, np.zeros((nc, kb))])
    r_b = np.hstack([b_uf.r_factor @ k.d_c @ c, b_uf.r_factor @ k.c_c])
    a_cl = UncertaintyFactors(a0cl, np.abs(m_a) @ np.abs(r_a), m_a, r_a)
    a_dcl = UncertaintyFactors(a0dcl, np.abs(m_b) @ np.abs(r_b), m_b, r_b)
    return a_cl, a_dcl


MODES = ("relaxed", "gain", "lyapunov")


def assemble_synthesis(sys, n_c, mode="relaxed", t_s=None, gains=None, robust=True):
    """Synthesis LMI for controller order ``n_c``.

    Parameters
    ----------
    mode : {"relaxed", "gain", "lyapunov"}
        ``relaxed``: ``T_S``, ``W1..W4`` all free (``W2``, ``W4`` ignore their
        ``(.) C T_S`` structure). ``gain``: ``T_S = t_s`` fixed, ``B_c`` and
        ``D_c`` are variables. ``lyapunov``: ``gains = (B_c, D_c)`` fixed,
        ``T_S`` free.
    robust : bool
        False drops the uncertainty border (the certain-plant condition).

    Variables are ``P, Q, Z`` (order ``n + n_c``), ``N1..N3``, ``T_S``, ``T_C``,
    ``W1``, ``W3`` and, per mode, ``W2, W4`` or ``B_c, D_c``, then ``eta``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    tau, mu = sys.delay.tau, sys.delay.mu
    a_uf, b_uf = sys.factors()
    C = sys.c_out
    n, l, m = sys.n, sys.n_inputs, sys.n_outputs
    nc = int(n_c)
    if nc < 0:
        raise ValueError("n_c must be >= 0")
    N = n + nc
    prob = LmiProblem(f"synthesis-{mode}")
    v = {}
    v["P"] = prob.declare_var("P", "symmetric", N, "positive_definite")
    v["Q"] = prob.declare_var("Q", "symmetric", N, "positive_semidefinite")
    v["Z"] = prob.declare_var("Z", "symmetric", N, "positive_definite")
    for i in (1, 2, 3):
        v[f"N{i}"] = prob.declare_var(f"N{i}", "rectangular", (N, N))
    if mode == "gain":
        if t_s is None:
            raise ValueError("gain mode needs t_s")
        TS = as_expr(as_mat(t_s, "T_S"))
    else:
        TS = as_expr(prob.declare_var("T_S", "symmetric", n))
    TC = W1 = W3 = W2 = None
    if nc:
        TC = as_expr(prob.declare_var("T_C", "symmetric", nc))
        W1 = as_expr(prob.declare_var("W1", "rectangular", (nc, nc)))
        W3 = as_expr(prob.declare_var("W3", "rectangular", (l, nc)))
    if mode == "relaxed":
        if nc:
            W2 = as_expr(prob.declare_var("W2", "rectangular", (nc, n)))
        W4 = as_expr(prob.declare_var("W4", "rectangular", (l, n)))
    elif mode == "gain":
        cts = C @ TS.constant
        if nc:
            W2 = as_expr(prob.declare_var("B_c", "rectangular", (nc, m))) @ cts
        W4 = as_expr(prob.declare_var("D_c", "rectangular", (l, m))) @ cts
    else:
        if gains is None:
            raise ValueError("lyapunov mode needs gains = (B_c, D_c)")
        bc, dc = gains
        if nc:
            W2 = (as_mat(bc, "B_c") @ C) @ TS
        W4 = (as_mat(dc, "D_c") @ C) @ TS
    eta = prob.declare_var("eta", "scalar", cone="positive_scalar") if robust else None

    a0, b0 = a_uf.center, b_uf.center
    if nc:
        T = block([[TS, None], [None, TC]])
        X = block([[a0 @ TS, None], [W2, W1]])
        Y = block([[b0 @ W4, b0 @ W3], [None, None]], row_sizes=[n, nc], col_sizes=[n, nc])
    else:
        T, X, Y = TS, a0 @ TS, b0 @ W4
    lk = {k: as_expr(x) for k, x in v.items()}
    lk.update(T1=T, T2=T, T3=T)
    phi = structure_block(lk, tau, mu) + sym_rows([(X, Y)] * 3, N)
    # structure_block writes T3 + T3^T in the (3, 3) block, i.e. 2T here
    if robust:
        ka, kb = a_uf.n_slots, b_uf.n_slots
        E = np.zeros((4 * N, ka + kb))
        for i in range(3):
            E[i * N : i * N + n, :ka] = -a_uf.m_factor
            E[i * N : i * N + n, ka:] = -b_uf.m_factor
        col_sizes = [n, nc, n, nc, 2 * N]
        G = block(
            [
                [a_uf.r_factor @ TS, None, None, None, None],
                [None, None, b_uf.r_factor @ W4, (b_uf.r_factor @ W3) if nc else None, None],
            ],
            row_sizes=[ka, kb],
            col_sizes=col_sizes,
        )
        lhs = block(
            [
                [phi + AffineMatrixExpr.scalar_times(eta, E @ E.T), G.T],
                [G, AffineMatrixExpr.scalar_times(eta, -np.eye(ka + kb))],
            ]
        )
        prob.add_constraint(lhs, "negdef", "synthesis")
    else:
        prob.add_constraint(phi, "negdef", "synthesis")
    prob.meta.update(kind="synthesis", mode=mode, n=n, n_c=nc, tau=tau, mu=mu, robust=robust)
    if mode == "gain":
        prob.meta["T_S"] = TS.constant.copy()
    return prob


def t_matrix(values, n, n_c):
    """The multiplier ``diag(T_S, T_C)`` of a synthesis certificate."""
    T = np.zeros((n + n_c, n + n_c))
    T[:n, :n] = values["T_S"]
    if n_c:
        T[n:, n:] = values["T_C"]
    return T


def _full_values(prob, cert_values):
    """Certificate values completed with the fixed ``T_S`` of a gain step."""
    vals = dict(cert_values)
    if "T_S" not in vals:
        vals["T_S"] = prob.meta["T_S"]
    return vals


def _inv_checked(t, name):
    w = sym_eig(t)
    if w.size and np.min(np.abs(w)) <= 1e-10 * max(1.0, np.max(np.abs(w))):
        raise RecoveryFailure(f"{name} is singular (min |eig| = {np.min(np.abs(w)):.2e})")
    return pinv(t)


def recover(values, sys, n_c, gains=None):
    """Controller from a synthesis certificate, with residuals.

    ``A_c = W1 T_C^-1``, ``C_c = W3 T_C^-1``, and ``B_c``, ``D_c`` either read
    directly (gain step), taken from ``gains`` (Lyapunov step) or fitted to
    ``W2``, ``W4`` by least squares against ``C T_S`` (relaxed step).

    Returns ``(controller, residuals)`` with residual keys ``W1..W4``.
    """
    C = sys.c_out
    l, m = sys.n_inputs, sys.n_outputs
    nc = int(n_c)
    ts = np.asarray(values["T_S"], dtype=float)
    cts = C @ ts
    res = {}
    if nc:
        tci = _inv_checked(np.asarray(values["T_C"]), "T_C")
        a_c = values["W1"] @ tci
        c_c = values["W3"] @ tci
        res["W1"] = max_norm(a_c @ values["T_C"] - values["W1"])
        res["W3"] = max_norm(c_c @ values["T_C"] - values["W3"])
    else:
        a_c, c_c = _empty(0, 0), _empty(l, 0)
    if "D_c" in values:
        d_c = np.asarray(values["D_c"])
        b_c = np.asarray(values["B_c"]) if nc else _empty(0, m)
    elif gains is not None:
        b_c, d_c = (np.asarray(g, dtype=float) for g in gains)
        if not nc:
            b_c = _empty(0, m)
    else:
        p = pinv(cts)
        d_c = values["W4"] @ p
        b_c = values["W2"] @ p if nc else _empty(0, m)
    if "W4" in values:
        res["W4"] = max_norm(d_c @ cts - values["W4"])
    else:
        res["W4"] = 0.0
    if nc:
        res["W2"] = max_norm(b_c @ cts - values["W2"]) if "W2" in values else 0.0
    return Controller(a_c, b_c, c_c, d_c), res


def residuals_ok(values, res):
    for k, r in res.items():
        w = max_norm(values[k]) if k in values else 0.0
        if r > 1e-6 * (1.0 + w):
            return False
    return True


@dataclass
class SynthesisOptions:
    max_outer_iter: int = 10
    conv_tol: float = 1e-6
    solve: SolveOptions = field(default_factory=SolveOptions)
    robust: bool = True


@dataclass
class SynthesisResult:
    controller: Controller
    certificate: object
    recovery_residuals: dict
    iterations: int
    post_validation: object
    history: list = field(default_factory=list)


def post_validate(sys, k, opts=None):
    """Robust analysis of the closed loop; the arbiter for every synthesized controller."""
    a_cl, a_dcl = close_loop(sys, k)
    return analyze_interval(a_cl, a_dcl, sys.delay.tau, sys.delay.mu, opts)


def synthesize(sys, n_c, opts=None):
    """Search for an order-``n_c`` controller whose closed loop is certified.

    Raises
    ------
    NoFeasibleIterate
        Not even the relaxed synthesis LMI is feasible.
    PostValidationFailure
        Controllers were produced but none passed the closed-loop analysis.
    RecoveryFailure
        ``T_C`` singular or residuals too large.
    """
    opts = opts or SynthesisOptions()
    so = opts.solve
    nc = int(n_c)
    history = []

    def log(step, res, extra=""):
        history.append(
            {"step": step, "status": res.status, "margin": res.certificate.margin if res.feasible else None, "note": extra}
        )

    p0 = assemble_synthesis(sys, nc, "relaxed", robust=opts.robust)
    r0 = solve(p0, so)
    log("relaxed", r0)
    if not r0.feasible:
        raise NoFeasibleIterate(f"relaxed synthesis LMI not feasible ({r0.status}: {r0.reason})")
    t_s = r0.certificate["T_S"]
    k, _ = recover(r0.certificate.values, sys, nc)
    last_post = None
    any_gain = False
    outer = 0

    def accept(prob, res):
        vals = _full_values(prob, res.certificate.values)
        k_rec, resid = recover(vals, sys, nc)
        if not residuals_ok(_with_products(vals, k_rec, sys, nc), resid):
            raise RecoveryFailure(f"recovery residuals too large: {resid}")
        post = post_validate(sys, k_rec, so)
        return k_rec, resid, post, vals

    for outer in range(1, opts.max_outer_iter + 1):
        pg = assemble_synthesis(sys, nc, "gain", t_s=t_s, robust=opts.robust)
        rg = solve(pg, so)
        log("gain", rg)
        if rg.feasible:
            any_gain = True
            k_new, resid, post, vals = accept(pg, rg)
            last_post = post
            if post.certified:
                cert = rg.certificate
                cert.values = _with_products(vals, k_new, sys, nc)
                return SynthesisResult(k_new, cert, resid, outer, post, history)
            history[-1]["note"] = "post-validation failed"
            if np.max(np.abs(k_new.params() - k.params()), initial=0.0) < opts.conv_tol:
                break
            k = k_new
        gains = (k.b_c, k.d_c)
        pl = assemble_synthesis(sys, nc, "lyapunov", gains=gains, robust=opts.robust)
        rl = solve(pl, so)
        log("lyapunov", rl)
        if not rl.feasible:
            break
        vals = dict(rl.certificate.values)
        k_new, resid = recover(vals, sys, nc, gains)
        post = post_validate(sys, k_new, so)
        last_post = post
        if post.certified and residuals_ok(_with_products(vals, k_new, sys, nc), resid):
            cert = rl.certificate
            cert.values = _with_products(vals, k_new, sys, nc)
            return SynthesisResult(k_new, cert, resid, outer, post, history)
        t_s = vals["T_S"]
        k = k_new
    if last_post is None and not any_gain:
        raise NoFeasibleIterate(f"no gain or Lyapunov step was feasible after {outer} outer iterations")
    raise PostValidationFailure(f"no controller passed closed-loop analysis after {outer} outer iterations")


def _with_products(vals, k, sys, nc):
    """Add ``B_c``, ``D_c`` and ``W2``, ``W4`` computed from the controller, if absent."""
    out = dict(vals)
    cts = sys.c_out @ out["T_S"]
    out.setdefault("D_c", k.d_c)
    out.setdefault("W4", k.d_c @ cts)
    if nc:
        out.setdefault("B_c", k.b_c)
        out.setdefault("W2", k.b_c @ cts)
    return out
