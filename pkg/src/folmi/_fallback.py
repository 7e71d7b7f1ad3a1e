"""Pure-Python implementations of the numerical kernels.

These mirror :mod:`folmi._kernels` (Cython) line for line and are used when
the compiled extension is unavailable or ``FOLMI_NO_EXT=1`` is set.
"""

from __future__ import annotations

import math

import numpy as np

from folmi.errors import ConvergenceError


def jacobi_eigh(a, tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(w, v, sweeps)`` with ``a = v @ diag(w) @ v.T``. Eigenvalues are
    not sorted here.
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    if n < 2:
        return np.diag(a).copy(), v, 0
    scale = math.sqrt(float(np.sum(a * a)))
    if scale == 0.0:
        return np.zeros(n), v, 0
    sweeps = 0
    while True:
        off = math.sqrt(float(np.sum((a - np.diag(np.diag(a))) ** 2)))
        if off <= tol * scale:
            break
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"Jacobi did not converge within {max_sweeps} sweeps (norm={scale:.3e})"
            )
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                g = 100.0 * abs(apq)
                if sweeps > 4 and abs(a[p, p]) + g == abs(a[p, p]) and abs(a[q, q]) + g == abs(a[q, q]):
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                if apq == 0.0:
                    continue
                h = a[q, q] - a[p, p]
                if abs(h) + g == abs(h):
                    t = apq / h
                else:
                    theta = 0.5 * h / apq
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                colp = a[:, p].copy()
                colq = a[:, q].copy()
                a[:, p] = c * colp - s * colq
                a[:, q] = s * colp + c * colq
                rowp = a[p, :].copy()
                rowq = a[q, :].copy()
                a[p, :] = c * rowp - s * rowq
                a[q, :] = s * rowp + c * rowq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v, sweeps


def hessenberg(a):
    """Householder reduction to upper Hessenberg form (similarity transform)."""
    h = np.array(a, dtype=float, copy=True)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1 :, k].copy()
        normx = math.sqrt(float(x @ x))
        if normx == 0.0:
            continue
        alpha = -normx if x[0] >= 0.0 else normx
        x[0] -= alpha
        normv = math.sqrt(float(x @ x))
        if normv == 0.0:
            continue
        x /= normv
        h[k + 1 :, k:] -= 2.0 * np.outer(x, x @ h[k + 1 :, k:])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ x, x)
        h[k + 2 :, k] = 0.0
    return h


def _sign(a, b):
    return abs(a) if b >= 0.0 else -abs(a)


def hqr_eigvals(h, max_iter):
    """Eigenvalues of an upper Hessenberg matrix by Francis double-shift QR.

    ``max_iter`` caps the total number of QR sweeps over all eigenvalues.
    Returns ``(wr, wi, iterations)``.
    """
    n = h.shape[0]
    # 1-based working copy keeps the classic index arithmetic readable
    a = [[0.0] * (n + 1) for _ in range(n + 1)]
    for i in range(n):
        for j in range(n):
            a[i + 1][j + 1] = float(h[i, j])
    wr = [0.0] * (n + 1)
    wi = [0.0] * (n + 1)
    anorm = 0.0
    for i in range(1, n + 1):
        for j in range(max(i - 1, 1), n + 1):
            anorm += abs(a[i][j])
    nn = n
    t = 0.0
    total = 0
    p = q = r = x = y = z = w = 0.0
    while nn >= 1:
        its = 0
        while True:
            l = nn
            while l >= 2:
                s = abs(a[l - 1][l - 1]) + abs(a[l][l])
                if s == 0.0:
                    s = anorm
                if abs(a[l][l - 1]) + s == s:
                    a[l][l - 1] = 0.0
                    break
                l -= 1
            x = a[nn][nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
            else:
                y = a[nn - 1][nn - 1]
                w = a[nn][nn - 1] * a[nn - 1][nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = math.sqrt(abs(q))
                    x += t
                    if q >= 0.0:
                        z = p + _sign(z, p)
                        wr[nn - 1] = wr[nn] = x + z
                        if z != 0.0:
                            wr[nn] = x - w / z
                        wi[nn - 1] = wi[nn] = 0.0
                    else:
                        wr[nn - 1] = wr[nn] = x + p
                        wi[nn - 1] = -z
                        wi[nn] = z
                    nn -= 2
                else:
                    if total >= max_iter:
                        raise ConvergenceError(
                            f"QR iteration cap {max_iter} reached (norm={anorm:.3e})"
                        )
                    if its > 0 and its % 10 == 0:
                        # exceptional shift
                        t += x
                        for i in range(1, nn + 1):
                            a[i][i] -= x
                        s = abs(a[nn][nn - 1]) + abs(a[nn - 1][nn - 2])
                        y = x = 0.75 * s
                        w = -0.4375 * s * s
                    its += 1
                    total += 1
                    m = nn - 2
                    while m >= l:
                        z = a[m][m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1]
                        q = a[m + 1][m + 1] - z - r - s
                        r = a[m + 2][m + 1]
                        s = abs(p) + abs(q) + abs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = abs(a[m][m - 1]) * (abs(q) + abs(r))
                        v = abs(p) * (abs(a[m - 1][m - 1]) + abs(z) + abs(a[m + 1][m + 1]))
                        if u + v == v:
                            break
                        m -= 1
                    for i in range(m + 2, nn + 1):
                        a[i][i - 2] = 0.0
                        if i != m + 2:
                            a[i][i - 3] = 0.0
                    for k in range(m, nn):
                        if k != m:
                            p = a[k][k - 1]
                            q = a[k + 1][k - 1]
                            r = 0.0
                            if k != nn - 1:
                                r = a[k + 2][k - 1]
                            x = abs(p) + abs(q) + abs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = _sign(math.sqrt(p * p + q * q + r * r), p)
                        if s != 0.0:
                            if k == m:
                                if l != m:
                                    a[k][k - 1] = -a[k][k - 1]
                            else:
                                a[k][k - 1] = -s * x
                            p += s
                            x = p / s
                            y = q / s
                            z = r / s
                            q /= p
                            r /= p
                            for j in range(k, nn + 1):
                                p = a[k][j] + q * a[k + 1][j]
                                if k != nn - 1:
                                    p += r * a[k + 2][j]
                                    a[k + 2][j] -= p * z
                                a[k + 1][j] -= p * y
                                a[k][j] -= p * x
                            mmin = nn if nn < k + 3 else k + 3
                            for i in range(l, mmin + 1):
                                p = x * a[i][k] + y * a[i][k + 1]
                                if k != nn - 1:
                                    p += z * a[i][k + 2]
                                    a[i][k + 2] -= p * r
                                a[i][k + 1] -= p * q
                                a[i][k] -= p
            if l >= nn - 1:
                break
    return np.array(wr[1:]), np.array(wi[1:]), total


def gl_march(solve_mat, had, coeffs, x0, pos, hist, memory, limit):
    """March the Grünwald-Letnikov recurrence for a linear delay system.

    Parameters
    ----------
    solve_mat : (n, n) inverse of ``I - h**alpha * A``.
    had : (n, n) ``h**alpha * A_d``.
    coeffs : GL coefficients, at least ``len(pos)`` of them.
    x0 : initial state.
    pos : delayed argument of each step in units of ``h`` (negative means history).
    hist : (steps + 1, n) history values used where ``pos < 0``.
    memory : number of convolution terms kept.
    limit : norm above which the march stops and reports divergence.

    Returns
    -------
    states, last_step, diverged
    """
    n = x0.shape[0]
    steps = pos.shape[0] - 1
    xs = np.zeros((steps + 1, n))
    xs[0] = x0
    dev = np.zeros((steps + 1, n))
    for k in range(1, steps + 1):
        m = min(k, memory)
        # dev[k-1], dev[k-2], ..., dev[k-m] weighted by c_1..c_m
        conv = coeffs[1 : m + 1] @ dev[k - 1 :: -1][:m] if m > 0 else 0.0
        u = pos[k]
        if u < 0.0:
            xd = hist[k]
        else:
            i = int(math.floor(u))
            if i >= k - 1:
                xd = xs[k - 1]
            else:
                f = u - i
                xd = (1.0 - f) * xs[i] + f * xs[i + 1]
        rhs = x0 - conv + had @ xd
        xk = solve_mat @ rhs
        xs[k] = xk
        dev[k] = xk - x0
        nrm = float(np.sqrt(xk @ xk))
        if not math.isfinite(nrm) or nrm > limit:
            return xs[: k + 1], k, True
    return xs, steps, False
