"""LMI problems, certificates and solver-independent verification."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from folmi.errors import AsymmetryError, DimensionError, MalformedProblemError, MissingAssignmentError
from folmi.linalg import max_norm, sym_eig
from folmi.lmi.expr import AffineMatrixExpr, VarId, as_expr

SENSES = ("negdef", "negsemidef", "posdef", "possemidef")
STRICT = ("negdef", "posdef")


@dataclass
class Constraint:
    name: str
    expr: AffineMatrixExpr
    sense: str

    @property
    def strict(self):
        return self.sense in STRICT

    @property
    def negative(self):
        return self.sense.startswith("neg")

    @property
    def scale(self):
        """Reference size of the constraint: ``max(1, ||constant||_max)``."""
        return max(1.0, max_norm(self.expr.constant))


class LmiProblem:
    """A registry of matrix variables and symmetric matrix constraints.

    Variable cones (``positive_definite`` etc.) become constraints of their own
    when the problem is scalarized or verified, named ``"<var> cone"``.
    """

    def __init__(self, name="lmi"):
        self.name = name
        self.vars = []
        self.constraints = []
        self.meta = {}

    # variables ----------------------------------------------------------

    def declare_var(self, name, kind, size=None, cone="free"):
        """Register a variable.

        ``size`` is ``n`` for ``symmetric``, ``(r, c)`` for ``rectangular``
        and ignored for ``scalar``.
        """
        if any(v.name == name for v in self.vars):
            raise MalformedProblemError(f"variable {name!r} declared twice")
        if kind == "symmetric":
            shape = (int(size), int(size))
        elif kind == "rectangular":
            shape = (int(size[0]), int(size[1]))
        elif kind == "scalar":
            shape = (1, 1)
        else:
            raise MalformedProblemError(f"unknown variable kind {kind!r}")
        v = VarId(len(self.vars), name, kind, shape, cone)
        self.vars.append(v)
        return v

    def var(self, name):
        for v in self.vars:
            if v.name == name:
                return v
        raise KeyError(name)

    @property
    def n_unknowns(self):
        return sum(v.n_unknowns for v in self.vars)

    # constraints --------------------------------------------------------

    def add_constraint(self, expr, sense="negdef", name=None):
        expr = as_expr(expr)
        if sense not in SENSES:
            raise MalformedProblemError(f"unknown sense {sense!r}")
        r, c = expr.shape
        if r != c:
            raise MalformedProblemError(f"constraint must be square, got {expr.shape}")
        for v in expr.vars:
            if v.index >= len(self.vars) or self.vars[v.index] is not v:
                raise MalformedProblemError(f"variable {v.name!r} is not registered in this problem")
        name = name or f"c{len(self.constraints)}"
        con = Constraint(name, expr, sense)
        F0, F = self._scalarize_one(con)
        bad = max(max_norm(F0 - F0.T), max((max_norm(f - f.T) for f in F), default=0.0))
        if bad > 1e-12 * max(1.0, max_norm(F0), max((max_norm(f) for f in F), default=0.0)):
            raise MalformedProblemError(f"constraint {name!r} is not symmetric (asymmetry {bad:.2e})")
        self.constraints.append(con)
        return con

    def cone_constraints(self):
        out = []
        for v in self.vars:
            if v.cone == "free":
                continue
            sense = {"positive_definite": "posdef", "positive_semidefinite": "possemidef", "positive_scalar": "posdef"}[
                v.cone
            ]
            out.append(Constraint(f"{v.name} cone", AffineMatrixExpr.of_var(v), sense))
        return out

    def all_constraints(self):
        return list(self.constraints) + self.cone_constraints()

    # scalarization ------------------------------------------------------

    def offsets(self):
        off, k = {}, 0
        for v in self.vars:
            off[v.name] = k
            k += v.n_unknowns
        return off

    def _scalarize_one(self, con):
        d = con.expr.shape[0]
        F = np.zeros((self.n_unknowns, d, d))
        off = self.offsets()
        for t in con.expr.terms:
            k0 = off[t.var.name]
            F[k0 : k0 + t.var.n_unknowns] += t.coefficients()
        return con.expr.constant.copy(), F

    def scalarize(self):
        """``[(constraint, F0, F)]`` with ``expr(x) = F0 + sum_k x_k F[k]``."""
        return [(c, *self._scalarize_one(c)) for c in self.all_constraints()]

    def unpack(self, x):
        """Map a flat unknown vector back to named variable values."""
        x = np.asarray(x, dtype=float)
        vals, k = {}, 0
        for v in self.vars:
            r, c = v.shape
            m = v.n_unknowns
            seg = x[k : k + m]
            if v.kind == "symmetric":
                X = np.zeros((r, r))
                X[np.triu_indices(r)] = seg
                X = X + np.triu(X, 1).T
            else:
                X = seg.reshape(r, c)
            vals[v.name] = X
            k += m
        return vals

    def pack(self, values):
        parts = []
        for v in self.vars:
            X = np.asarray(values[v.name], dtype=float).reshape(v.shape)
            parts.append(X[np.triu_indices(v.shape[0])] if v.kind == "symmetric" else X.ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    def summary(self):
        sizes = [c.expr.shape[0] for c in self.constraints]
        return {"vars": len(self.vars), "unknowns": self.n_unknowns, "constraints": len(self.constraints), "sizes": sizes}


@dataclass
class Certificate:
    """Values of every variable (declaration order), with margin and solver info."""

    values: dict
    margin: float = 0.0
    backend_name: str = ""
    iterations: int = 0

    def __getitem__(self, name):
        return self.values[name]

    def scalar(self, name):
        return float(np.asarray(self.values[name]).reshape(-1)[0])

    def to_json(self):
        return {
            "vars": {
                k: {"shape": list(np.atleast_2d(v).shape), "data": np.atleast_2d(v).tolist()}
                for k, v in self.values.items()
            },
            "margin": self.margin,
            "backend": self.backend_name,
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2) + "\n"

    @classmethod
    def from_json(cls, doc):
        if "vars" not in doc:
            raise MalformedProblemError("certificate document has no 'vars'")
        vals = {}
        for k, e in doc["vars"].items():
            shape = tuple(e["shape"])
            data = np.array(e["data"], dtype=float)
            if data.size == 0:
                data = np.zeros(shape)
            if data.shape != shape:
                raise DimensionError(f"certificate entry {k}: data shape {data.shape} != {shape}")
            vals[k] = data
        return cls(vals, float(doc.get("margin", 0.0)), str(doc.get("backend", "")), 0)


@dataclass
class ConstraintCheck:
    name: str
    sense: str
    extreme: float  # lambda_max for neg senses, lambda_min for pos senses
    slack: float  # distance to the boundary, positive when satisfied
    required: float
    passed: bool
    scale: float = 1.0


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)
    margin: float = 0.0
    tol: float = 0.0

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def min_normalized_slack(self):
        vals = [c.slack / c.scale for c in self.checks if c.sense in STRICT]
        return min(vals) if vals else np.inf

    def failing(self):
        return [c for c in self.checks if not c.passed]

    def lines(self):
        out = []
        for c in self.checks:
            tag = "lambda_max" if c.sense.startswith("neg") else "lambda_min"
            out.append(f"{c.name}: {c.sense} {tag} = {c.extreme:.6e} {'pass' if c.passed else 'FAIL'}")
        return out


def verify(problem, cert, margin=0.0, tol=1e-8):
    """Check a certificate by direct evaluation and Jacobi eigenvalues.

    Each strict constraint must have slack at least ``margin * scale - tol``,
    each non-strict one at least ``-tol``. No solver is involved, and the
    scalarized coefficients are not used either.
    """
    values = cert.values if isinstance(cert, Certificate) else cert
    for v in problem.vars:
        if v.name not in values:
            raise MissingAssignmentError(v.name)
        x = np.asarray(values[v.name], dtype=float)
        if v.kind != "scalar" and x.shape != v.shape:
            raise DimensionError(f"{v.name}: value shape {x.shape}, expected {v.shape}")
        if v.kind == "symmetric" and max_norm(x - x.T) > 1e-9 * max(1.0, max_norm(x)):
            raise AsymmetryError(f"value of symmetric variable {v.name} is not symmetric")
    report = VerifyReport(margin=margin, tol=tol)
    for con in problem.all_constraints():
        m = con.expr.evaluate(values)
        m = 0.5 * (m + m.T)
        w = sym_eig(m)
        if con.negative:
            extreme = float(w[-1])
            slack = -extreme
        else:
            extreme = float(w[0])
            slack = extreme
        required = (margin * con.scale if con.strict else 0.0) - tol
        report.checks.append(
            ConstraintCheck(con.name, con.sense, extreme, slack, required, slack >= required, con.scale)
        )
    return report
