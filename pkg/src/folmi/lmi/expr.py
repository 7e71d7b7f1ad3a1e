"""Affine matrix expressions in matrix-valued decision variables.

An expression is ``C + sum_k L_k X_k R_k`` (``X_k`` possibly transposed). A
scalar variable ``x`` stands for ``x * I`` of whatever size its neighbours
need, so ``eta * I_5`` is a single term with ``L = R = I_5``. Products of two
expressions are rejected: everything stays affine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from folmi.errors import DimensionError, MalformedProblemError, MissingAssignmentError

KINDS = ("symmetric", "rectangular", "scalar")
CONES = ("free", "positive_definite", "positive_semidefinite", "positive_scalar")


@dataclass(frozen=True, eq=False)
class VarId:
    """A registered decision variable. Identity (not value) equality."""

    index: int
    name: str
    kind: str
    shape: tuple
    cone: str = "free"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MalformedProblemError(f"unknown variable kind {self.kind!r}")
        if self.cone not in CONES:
            raise MalformedProblemError(f"unknown cone {self.cone!r}")
        if self.cone in ("positive_definite", "positive_semidefinite") and self.kind != "symmetric":
            raise MalformedProblemError(f"cone {self.cone} needs a symmetric variable, {self.name} is {self.kind}")
        if self.cone == "positive_scalar" and self.kind != "scalar":
            raise MalformedProblemError(f"cone positive_scalar needs a scalar variable, {self.name} is {self.kind}")
        r, c = self.shape
        if r < 0 or c < 0 or (self.kind == "symmetric" and r != c) or (self.kind == "scalar" and (r, c) != (1, 1)):
            raise MalformedProblemError(f"bad shape {self.shape} for {self.kind} variable {self.name}")

    @property
    def n_unknowns(self):
        r, c = self.shape
        if self.kind == "symmetric":
            return r * (r + 1) // 2
        return r * c

    def __repr__(self):
        return f"VarId({self.index}, {self.name!r}, {self.kind}, {self.shape}, {self.cone})"


@dataclass(frozen=True, eq=False)
class Term:
    left: np.ndarray
    var: VarId
    right: np.ndarray
    transposed: bool = False

    @property
    def shape(self):
        return (self.left.shape[0], self.right.shape[1])

    def value(self, x):
        """``L X R`` for a concrete value ``x`` of the variable."""
        if self.var.kind == "scalar":
            return float(np.asarray(x).reshape(-1)[0]) * (self.left @ self.right)
        x = np.asarray(x, dtype=float)
        return self.left @ (x.T if self.transposed else x) @ self.right

    def coefficients(self):
        """Coefficient matrices of the term, one per scalar unknown of the variable.

        Symmetric variables are packed upper-triangle, row-major; rectangular
        ones row-major; a scalar has a single unknown.
        """
        L, R = self.left, self.right
        v = self.var
        if v.kind == "scalar":
            return (L @ R)[None, :, :]
        if self.transposed:
            # entry (a, b) of X sits at (b, a) of X^T
            full = np.einsum("pb,aq->abpq", L, R)
        else:
            full = np.einsum("pa,bq->abpq", L, R)
        r, c = v.shape
        if v.kind == "rectangular":
            return full.reshape(r * c, L.shape[0], R.shape[1])
        out = []
        for i in range(r):
            for j in range(i, r):
                out.append(full[i, i] if i == j else full[i, j] + full[j, i])
        if not out:
            return np.zeros((0, L.shape[0], R.shape[1]))
        return np.stack(out)


def _as_const(m, shape=None):
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        if shape is None:
            a = a.reshape(1, 1)
        else:
            a = np.full(shape, float(a)) if float(a) == 0.0 else None
            if a is None:
                raise DimensionError("only zero scalars broadcast to a matrix")
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    return a


class AffineMatrixExpr:
    """``constant + sum of Terms``; supports +, -, scalar *, constant @, .T and blocks."""

    # make numpy defer, so ``ndarray @ expr`` reaches __rmatmul__
    __array_ufunc__ = None

    def __init__(self, constant, terms=()):
        self.constant = np.asarray(constant, dtype=float)
        if self.constant.ndim != 2:
            raise DimensionError("expression constant must be 2-D")
        self.terms = tuple(terms)
        for t in self.terms:
            if t.shape != self.constant.shape:
                raise DimensionError(f"term of shape {t.shape} in expression of shape {self.constant.shape}")

    # construction -----------------------------------------------------

    @classmethod
    def of_var(cls, v):
        r, c = v.shape
        if v.kind == "scalar":
            return cls(np.zeros((1, 1)), [Term(np.eye(1), v, np.eye(1))])
        return cls(np.zeros((r, c)), [Term(np.eye(r), v, np.eye(c))])

    @classmethod
    def const(cls, m):
        return cls(_as_const(m))

    @classmethod
    def scalar_times(cls, v, m):
        """``x * m`` for a scalar variable ``x`` and constant matrix ``m``."""
        if v.kind != "scalar":
            raise MalformedProblemError(f"{v.name} is not a scalar variable")
        m = _as_const(m)
        return cls(np.zeros(m.shape), [Term(m, v, np.eye(m.shape[1]))])

    # shape --------------------------------------------------------------

    @property
    def shape(self):
        return self.constant.shape

    @property
    def vars(self):
        seen = []
        for t in self.terms:
            if not any(t.var is s for s in seen):
                seen.append(t.var)
        return seen

    # algebra ------------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, AffineMatrixExpr):
            return other
        return AffineMatrixExpr(_as_const(other, self.shape))

    def __add__(self, other):
        o = self._coerce(other)
        if o.shape != self.shape:
            raise DimensionError(f"cannot add shapes {self.shape} and {o.shape}")
        return AffineMatrixExpr(self.constant + o.constant, self.terms + o.terms)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, k):
        if isinstance(k, AffineMatrixExpr):
            raise MalformedProblemError("product of two affine expressions is not affine")
        k = float(k)
        return AffineMatrixExpr(
            k * self.constant, [Term(k * t.left, t.var, t.right, t.transposed) for t in self.terms]
        )

    __rmul__ = __mul__

    def __matmul__(self, m):
        if isinstance(m, AffineMatrixExpr):
            raise MalformedProblemError("product of two affine expressions is not affine")
        m = _as_const(m)
        if m.shape[0] != self.shape[1]:
            raise DimensionError(f"cannot multiply {self.shape} by {m.shape}")
        return AffineMatrixExpr(
            self.constant @ m, [Term(t.left, t.var, t.right @ m, t.transposed) for t in self.terms]
        )

    def __rmatmul__(self, m):
        m = _as_const(m)
        if m.shape[1] != self.shape[0]:
            raise DimensionError(f"cannot multiply {m.shape} by {self.shape}")
        return AffineMatrixExpr(
            m @ self.constant, [Term(m @ t.left, t.var, t.right, t.transposed) for t in self.terms]
        )

    @property
    def T(self):
        terms = []
        for t in self.terms:
            flip = not t.transposed if t.var.kind == "rectangular" else False
            terms.append(Term(t.right.T, t.var, t.left.T, flip))
        return AffineMatrixExpr(self.constant.T, terms)

    def sym(self):
        """``E + E^T``."""
        return self + self.T

    # evaluation ---------------------------------------------------------

    def evaluate(self, values):
        """Numerical value given ``values[var.name]`` for every variable used."""
        out = self.constant.copy()
        for t in self.terms:
            if t.var.name not in values:
                raise MissingAssignmentError(t.var.name)
            x = np.asarray(values[t.var.name], dtype=float)
            if t.var.kind != "scalar" and x.shape != t.var.shape:
                raise DimensionError(f"value of {t.var.name} has shape {x.shape}, expected {t.var.shape}")
            out = out + t.value(x)
        return out

    def __repr__(self):
        names = ", ".join(v.name for v in self.vars)
        return f"AffineMatrixExpr(shape={self.shape}, vars=[{names}])"


def as_expr(x):
    if isinstance(x, AffineMatrixExpr):
        return x
    if isinstance(x, VarId):
        return AffineMatrixExpr.of_var(x)
    return AffineMatrixExpr.const(x)


def block(grid, row_sizes=None, col_sizes=None):
    """Block expression from a grid of expressions, variables, constants or ``None``.

    Each block ``B_ij`` is embedded as ``E_i B_ij F_j^T`` with 0/1 selector
    matrices, so the result is again a single affine expression.
    """
    nr = len(grid)
    nc = len(grid[0]) if nr else 0
    items = [[None if b is None else as_expr(b) for b in row] for row in grid]
    rs = list(row_sizes) if row_sizes is not None else [None] * nr
    cs = list(col_sizes) if col_sizes is not None else [None] * nc
    for i, row in enumerate(items):
        if len(row) != nc:
            raise DimensionError(f"grid row {i} has {len(row)} blocks, expected {nc}")
        for j, b in enumerate(row):
            if b is None:
                continue
            r, c = b.shape
            if rs[i] is None:
                rs[i] = r
            elif rs[i] != r:
                raise DimensionError(f"block ({i}, {j}) has {r} rows, grid row {i} needs {rs[i]}")
            if cs[j] is None:
                cs[j] = c
            elif cs[j] != c:
                raise DimensionError(f"block ({i}, {j}) has {c} cols, grid column {j} needs {cs[j]}")
    if any(r is None for r in rs) or any(c is None for c in cs):
        raise DimensionError("cannot infer size of an all-zero grid row or column")
    R, C = sum(rs), sum(cs)
    ro = np.concatenate([[0], np.cumsum(rs)]).astype(int)
    co = np.concatenate([[0], np.cumsum(cs)]).astype(int)
    out = AffineMatrixExpr(np.zeros((R, C)))
    for i in range(nr):
        E = np.zeros((R, rs[i]))
        E[ro[i] : ro[i + 1], :] = np.eye(rs[i])
        for j in range(nc):
            b = items[i][j]
            if b is None:
                continue
            F = np.zeros((cs[j], C))
            F[:, co[j] : co[j + 1]] = np.eye(cs[j])
            out = out + E @ b @ F
    return out
