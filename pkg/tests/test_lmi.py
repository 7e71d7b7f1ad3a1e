import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from folmi.errors import AsymmetryError, MalformedProblemError, MissingAssignmentError
from folmi.linalg import max_norm
from folmi.lmi import AffineMatrixExpr, Certificate, LmiProblem, as_expr, block, solve, verify

seeds = st.integers(0, 2**32 - 1)


def scalar_lyapunov(a):
    prob = LmiProblem("scalar")
    p = prob.declare_var("p", "symmetric", 1, "positive_definite")
    prob.add_constraint(2.0 * a * as_expr(p), "negdef", "lyap")
    return prob


def lyapunov(a):
    n = a.shape[0]
    prob = LmiProblem("lyapunov")
    p = as_expr(prob.declare_var("P", "symmetric", n, "positive_definite"))
    prob.add_constraint((p @ a).sym(), "negdef", "lyap")
    return prob


def random_problem(seed):
    """A problem mixing every variable kind, with a random symmetric expression."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    prob = LmiProblem("random")
    s = prob.declare_var("S", "symmetric", n, "positive_definite")
    r = prob.declare_var("R", "rectangular", (n, n + 1))
    e = prob.declare_var("e", "scalar", cone="positive_scalar")
    L = rng.standard_normal((2 * n, n))
    K = rng.standard_normal((n + 1, n))
    c0 = rng.standard_normal((2 * n, 2 * n))
    top = block([[L[:n] @ as_expr(s) @ L[:n].T, (as_expr(r) @ K)], [None, AffineMatrixExpr.scalar_times(e, np.eye(n))]])
    expr = top.sym() + (c0 + c0.T)
    prob.add_constraint(expr, "negdef", "mix")
    vals = {
        "S": (lambda x: x + x.T)(rng.standard_normal((n, n))),
        "R": rng.standard_normal((n, n + 1)),
        "e": np.array([[rng.uniform(0.1, 2.0)]]),
    }
    return prob, expr, vals


# declare_var -----------------------------------------------------------------


def test_declare_var_counts():
    prob = LmiProblem()
    assert prob.declare_var("P", "symmetric", 3, "positive_definite").n_unknowns == 6
    assert prob.declare_var("N", "rectangular", (2, 3)).n_unknowns == 6
    assert len(prob.vars) == 2 and prob.n_unknowns == 12


def test_declare_var_bad_cone():
    prob = LmiProblem()
    with pytest.raises(MalformedProblemError):
        prob.declare_var("eta", "scalar", cone="positive_definite")
    with pytest.raises(MalformedProblemError):
        prob.declare_var("N", "rectangular", (2, 2), "positive_semidefinite")
    prob.declare_var("x", "scalar")
    with pytest.raises(MalformedProblemError):
        prob.declare_var("x", "scalar")


def test_unregistered_var_rejected():
    other = LmiProblem()
    v = other.declare_var("X", "symmetric", 2)
    prob = LmiProblem()
    prob.declare_var("Y", "symmetric", 2)
    with pytest.raises(MalformedProblemError, match="not registered"):
        prob.add_constraint(as_expr(v), "negdef")


def test_asymmetric_constraint_rejected():
    prob = LmiProblem()
    x = prob.declare_var("X", "rectangular", (2, 2))
    with pytest.raises(MalformedProblemError, match="not symmetric"):
        prob.add_constraint(as_expr(x), "negdef")


# expressions ---------------------------------------------------------------------


@given(seeds)
def test_scalarization_matches_direct_evaluation(seed):
    prob, expr, vals = random_problem(seed)
    (con, F0, F), *_ = prob.scalarize()
    x = prob.pack(vals)
    direct = expr.evaluate(vals)
    via = F0 + np.tensordot(x, F, axes=1)
    assert max_norm(direct - via) <= 1e-12 * max(1.0, max_norm(direct))
    assert max_norm(direct - direct.T) <= 1e-10 * max(1.0, max_norm(direct))
    back = prob.unpack(x)
    for k in vals:
        np.testing.assert_allclose(back[k], vals[k], atol=0)


@given(seeds, st.floats(-5.0, 5.0))
def test_expression_linearity(seed, c):
    _, expr, vals = random_problem(seed)
    zero = {k: np.zeros_like(v) for k, v in vals.items()}
    base = expr.evaluate(zero)
    scaled = {k: c * v for k, v in vals.items()}
    lhs = expr.evaluate(scaled) - base
    rhs = c * (expr.evaluate(vals) - base)
    assert max_norm(lhs - rhs) <= 1e-10 * max(1.0, max_norm(rhs))


def test_transpose_and_products():
    prob = LmiProblem()
    x = prob.declare_var("X", "rectangular", (2, 3))
    a, b = np.arange(4.0).reshape(2, 2), np.arange(6.0).reshape(3, 2)
    e = a @ as_expr(x).T.T @ b
    xv = np.random.default_rng(0).standard_normal((2, 3))
    np.testing.assert_allclose(e.evaluate({"X": xv}), a @ xv @ b)
    np.testing.assert_allclose((as_expr(x).T @ a).evaluate({"X": xv}), xv.T @ a)


# verify ---------------------------------------------------------------------------


def test_verify_scalar_examples():
    rep = verify(scalar_lyapunov(-1.0), {"p": np.array([[1.0]])})
    assert rep.passed and rep.checks[0].extreme == pytest.approx(-2.0)
    rep = verify(scalar_lyapunov(1.0), {"p": np.array([[1.0]])})
    assert not rep.passed and rep.checks[0].extreme == pytest.approx(2.0)
    assert [c.name for c in rep.failing()] == ["lyap"]


def test_verify_missing_and_asymmetric():
    prob = lyapunov(-np.eye(2))
    with pytest.raises(MissingAssignmentError):
        verify(prob, {})
    with pytest.raises(AsymmetryError):
        verify(prob, {"P": np.array([[1.0, 0.5], [0.0, 1.0]])})


@given(seeds, st.floats(1e-8, 1e-2))
def test_shift_equivalence_in_verify(seed, eps):
    # margin eps on "expr < 0" is the same test as "expr + eps*s*I <= 0" at margin 0
    prob, expr, vals = random_problem(seed)
    con = prob.constraints[0]
    shifted = LmiProblem("shifted")
    for v in prob.vars:
        shifted.vars.append(v)
    shifted.add_constraint(expr + eps * con.scale * np.eye(expr.shape[0]), "negsemidef", "mix")
    a = verify(prob, vals, margin=eps, tol=0.0).checks[0]
    b = verify(shifted, vals, margin=0.0, tol=0.0).checks[0]
    assert abs((a.slack - a.required) - b.slack) <= 1e-9 * max(1.0, abs(b.slack))
    if abs(b.slack) > 1e-9:
        assert a.passed == b.passed


# solve --------------------------------------------------------------------------------


def test_solve_scalar_feasible_and_infeasible():
    res = solve(scalar_lyapunov(-1.0))
    assert res.status == "feasible" and res.certificate.scalar("p") > 0.0
    res = solve(scalar_lyapunov(1.0))
    assert res.status == "infeasible"


def test_solve_shift_equivalence_scalar():
    eps = 1e-3
    res = solve(scalar_lyapunov(-1.0), margin=eps)
    p = res.certificate.scalar("p")
    # the certificate also satisfies the shifted, non-strict problem
    assert 2.0 * (-1.0) * p + 0.9 * eps <= 0.0 and p >= 0.9 * eps


def test_solve_rejects_bad_options():
    with pytest.raises(MalformedProblemError):
        solve(scalar_lyapunov(-1.0), backend="nope")
    with pytest.raises(MalformedProblemError):
        solve(scalar_lyapunov(-1.0), margin=0.0)


def test_iteration_cap_is_not_infeasible():
    res = solve(lyapunov(np.array([[-1.0, 3.0], [0.0, -2.0]])), max_iter=1)
    assert res.status in ("feasible", "inconclusive")


def test_alternate_backend():
    res = solve(scalar_lyapunov(-1.0), backend="scs")
    assert res.status in ("feasible", "inconclusive")


@given(seeds, st.integers(1, 3))
def test_solve_verify_round_trip(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    prob = lyapunov(a)
    res = solve(prob)
    lam = np.linalg.eigvals(a).real.max()
    if res.feasible:
        assert verify(prob, res.certificate, margin=0.9e-6, tol=0.0).passed
        cert2 = Certificate.from_json(json.loads(res.certificate.dumps()))
        assert verify(prob, cert2, margin=0.9e-6, tol=0.0).passed
    # Lyapunov is exact: clear-cut cases must land on the right side
    if lam < -0.05:
        assert res.feasible
    if lam > 0.05:
        assert not res.feasible


def test_certificate_json_order_and_shapes():
    res = solve(lyapunov(-np.eye(2)))
    doc = res.certificate.to_json()
    assert list(doc["vars"]) == ["P"]
    assert doc["vars"]["P"]["shape"] == [2, 2]
    assert doc["backend"] == "clarabel" and doc["margin"] > 0
