"""Dense matrix kernels: block assembly, eigenvalues, pseudo-inverse, definiteness.

The iterative parts (Jacobi, Hessenberg + Francis QR) run in
:mod:`folmi.kernels`, which picks the compiled extension when it is built.
Tolerances are relative to the max-norm of the input unless stated otherwise.
"""

from __future__ import annotations

import numpy as np

from folmi import kernels
from folmi.errors import AsymmetryError, DimensionError


def as_mat(m, name="matrix"):
    """Coerce ``m`` to a finite 2-D float array (scalars become 1x1)."""
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def max_norm(m):
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def block_assemble(grid, row_sizes=None, col_sizes=None):
    """Concatenate a 2-D grid of blocks into one matrix.

    Parameters
    ----------
    grid : list of lists
        Each entry is an array or ``None`` (zero block). Zero blocks take their
        size from the other blocks in the same grid row/column.
    row_sizes, col_sizes : sequence of int, optional
        Explicit block sizes, needed only when a whole grid row or column is
        made of zero placeholders.

    Raises
    ------
    DimensionError
        Blocks in a grid row disagree on rows, or blocks in a grid column
        disagree on columns. The message names the offending coordinate.
    """
    nr = len(grid)
    if nr == 0:
        return np.zeros((0, 0))
    nc = len(grid[0])
    for i, row in enumerate(grid):
        if len(row) != nc:
            raise DimensionError(f"grid row {i} has {len(row)} blocks, expected {nc}")
    rs = list(row_sizes) if row_sizes is not None else [None] * nr
    cs = list(col_sizes) if col_sizes is not None else [None] * nc
    blocks = [[None if b is None else np.atleast_2d(np.asarray(b, dtype=float)) for b in row] for row in grid]
    for i in range(nr):
        for j in range(nc):
            b = blocks[i][j]
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
    out = np.zeros((sum(rs), sum(cs)))
    r0 = 0
    for i in range(nr):
        c0 = 0
        for j in range(nc):
            if blocks[i][j] is not None:
                out[r0 : r0 + rs[i], c0 : c0 + cs[j]] = blocks[i][j]
            c0 += cs[j]
        r0 += rs[i]
    return out


def _check_sym(m, tol):
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got {m.shape}")
    asym = max_norm(m - m.T)
    if asym > tol:
        raise AsymmetryError(f"max |m_ij - m_ji| = {asym:.3e} exceeds {tol:.3e}")


def sym_eigh(m, tol=1e-9):
    """Eigen-decomposition of a symmetric matrix, ascending.

    Returns ``(w, v)`` with ``m ~= v @ diag(w) @ v.T``. The symmetry tolerance
    ``tol`` is relative to the max-norm of ``m``.
    """
    m = as_mat(m)
    _check_sym(m, tol * max_norm(m))
    w, v, _ = kernels.jacobi_eigh(0.5 * (m + m.T))
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def sym_eig(m, tol=1e-9):
    """Sorted real eigenvalues of a symmetric matrix (cyclic Jacobi)."""
    return sym_eigh(m, tol)[0]


def gen_eig(m):
    """Complex eigenvalues of a general real square matrix.

    Householder reduction to Hessenberg form, then Francis double-shift QR
    capped at ``100 * n`` sweeps. Values are ordered by (real, imag).

    Raises
    ------
    ConvergenceError
        The sweep cap was reached; the message carries cap and norm.
    """
    m = as_mat(m)
    n = m.shape[0]
    if n != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got {m.shape}")
    if n == 0:
        return np.zeros(0, dtype=complex)
    h = kernels.hessenberg(m)
    wr, wi, _ = kernels.hqr_eigvals(h, 100 * n)
    lam = np.asarray(wr) + 1j * np.asarray(wi)
    return lam[np.lexsort((lam.imag, lam.real))]


def _hestenes(u, v, max_sweeps=30):
    """One-sided Jacobi: rotate columns of ``u`` (and ``v``) until mutually orthogonal."""
    k = u.shape[1]
    eps = np.finfo(float).eps
    for _ in range(max_sweeps):
        rotated = False
        for p in range(k - 1):
            for q in range(p + 1, k):
                a = u[:, p] @ u[:, p]
                b = u[:, q] @ u[:, q]
                g = u[:, p] @ u[:, q]
                if abs(g) <= eps * np.sqrt(a * b) or g == 0.0:
                    continue
                rotated = True
                zeta = (b - a) / (2.0 * g)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                sn = c * t
                up, uq = u[:, p].copy(), u[:, q].copy()
                u[:, p], u[:, q] = c * up - sn * uq, sn * up + c * uq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp - sn * vq, sn * vp + c * vq
        if not rotated:
            break
    return u, v


def pinv(m, rank_tol=1e-10):
    """Moore-Penrose pseudo-inverse.

    Right singular vectors start from the Jacobi decomposition of the smaller
    Gram matrix ``m^T m``; one-sided Jacobi sweeps on ``m V`` then restore the
    accuracy that squaring the condition number costs. Singular values are
    the column norms of ``m V``; values below ``rank_tol * sigma_max`` count
    as zero.
    """
    m = as_mat(m)
    r, c = m.shape
    if r < c:
        return pinv(m.T, rank_tol).T
    if m.size == 0:
        return np.zeros((c, r))
    _, v = sym_eigh(m.T @ m)
    mv, v = _hestenes(m @ v, v.copy())
    s = np.sqrt(np.sum(mv * mv, axis=0))
    smax = float(s.max()) if s.size else 0.0
    keep = s > rank_tol * smax if smax > 0.0 else np.zeros_like(s, dtype=bool)
    vk = v[:, keep]
    # m^+ = V S^-1 U^T with U = m V S^-1
    return vk @ (mv[:, keep] / (s[keep] ** 2)).T


def is_negdef(m, margin=0.0):
    """Return ``(ok, lam_max)`` where ``ok`` means ``lam_max(m) <= -margin``.

    Symmetry is checked to 1e-9 absolute.
    """
    m = as_mat(m)
    _check_sym(m, 1e-9)
    w = sym_eig(m, tol=np.inf)
    lam_max = float(w[-1]) if w.size else -np.inf
    return lam_max <= -margin, lam_max


def sym(m):
    """Return ``m + m.T``, the usual sym{.} shorthand."""
    return m + m.T
