"""Affine matrix inequalities: expressions, problems, solving and verification."""

from folmi.lmi.expr import AffineMatrixExpr, Term, VarId, as_expr, block
from folmi.lmi.problem import Certificate, Constraint, LmiProblem, VerifyReport, verify
from folmi.lmi.solve import Feasible, Inconclusive, Infeasible, SolveOptions, solve

__all__ = [
    "AffineMatrixExpr",
    "Certificate",
    "Constraint",
    "Feasible",
    "Inconclusive",
    "Infeasible",
    "LmiProblem",
    "SolveOptions",
    "Term",
    "VarId",
    "VerifyReport",
    "as_expr",
    "block",
    "solve",
    "verify",
]
