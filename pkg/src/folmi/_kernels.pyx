# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numerical kernels; same contracts as :mod:`folmi._fallback`."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, floor, isfinite

from folmi.errors import ConvergenceError

cnp.import_array()


cdef inline double _sign(double a, double b) nogil:
    return fabs(a) if b >= 0.0 else -fabs(a)


def jacobi_eigh(a, double tol=1e-15, int max_sweeps=100):
    cdef double[:, ::1] A = np.array(a, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = A.shape[0]
    V_arr = np.eye(n)
    cdef double[:, ::1] V = V_arr
    cdef Py_ssize_t p, q, i
    cdef double scale = 0.0, off, apq, theta, t, c, s, xp, xq, g, h
    cdef int sweeps = 0
    for p in range(n):
        for q in range(n):
            scale += A[p, q] * A[p, q]
    scale = sqrt(scale)
    if n < 2 or scale == 0.0:
        return np.array([A[i, i] for i in range(n)]), V_arr, 0
    while True:
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += A[p, q] * A[p, q]
        off = sqrt(off)
        if off <= tol * scale:
            break
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"Jacobi did not converge within {max_sweeps} sweeps (norm={scale:.3e})"
            )
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                g = 100.0 * fabs(apq)
                if sweeps > 4 and fabs(A[p, p]) + g == fabs(A[p, p]) and fabs(A[q, q]) + g == fabs(A[q, q]):
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    continue
                if apq == 0.0:
                    continue
                h = A[q, q] - A[p, p]
                if fabs(h) + g == fabs(h):
                    t = apq / h
                else:
                    theta = 0.5 * h / apq
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for i in range(n):
                    xp = A[i, p]
                    xq = A[i, q]
                    A[i, p] = c * xp - s * xq
                    A[i, q] = s * xp + c * xq
                for i in range(n):
                    xp = A[p, i]
                    xq = A[q, i]
                    A[p, i] = c * xp - s * xq
                    A[q, i] = s * xp + c * xq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for i in range(n):
                    xp = V[i, p]
                    xq = V[i, q]
                    V[i, p] = c * xp - s * xq
                    V[i, q] = s * xp + c * xq
    return np.array([A[i, i] for i in range(n)]), V_arr, sweeps


def hessenberg(a):
    H_arr = np.array(a, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] H = H_arr
    cdef Py_ssize_t n = H.shape[0]
    cdef Py_ssize_t k, i, j, m
    cdef double normx, alpha, normv, acc
    v_arr = np.zeros(n)
    cdef double[::1] v = v_arr
    for k in range(n - 2):
        m = n - k - 1
        normx = 0.0
        for i in range(m):
            v[i] = H[k + 1 + i, k]
            normx += v[i] * v[i]
        normx = sqrt(normx)
        if normx == 0.0:
            continue
        alpha = -normx if v[0] >= 0.0 else normx
        v[0] -= alpha
        normv = 0.0
        for i in range(m):
            normv += v[i] * v[i]
        normv = sqrt(normv)
        if normv == 0.0:
            continue
        for i in range(m):
            v[i] /= normv
        for j in range(k, n):
            acc = 0.0
            for i in range(m):
                acc += v[i] * H[k + 1 + i, j]
            for i in range(m):
                H[k + 1 + i, j] -= 2.0 * v[i] * acc
        for i in range(n):
            acc = 0.0
            for j in range(m):
                acc += H[i, k + 1 + j] * v[j]
            for j in range(m):
                H[i, k + 1 + j] -= 2.0 * acc * v[j]
        for i in range(k + 2, n):
            H[i, k] = 0.0
    return H_arr


def hqr_eigvals(h, int max_iter):
    cdef Py_ssize_t n = h.shape[0]
    a_arr = np.zeros((n + 1, n + 1))
    a_arr[1:, 1:] = h
    cdef double[:, ::1] a = a_arr
    wr_arr = np.zeros(n + 1)
    wi_arr = np.zeros(n + 1)
    cdef double[::1] wr = wr_arr
    cdef double[::1] wi = wi_arr
    cdef Py_ssize_t nn, m, l, k, j, i, mmin
    cdef int its, total = 0
    cdef double z = 0.0, y = 0.0, x = 0.0, w = 0.0, v, u, t = 0.0, s, r = 0.0, q = 0.0, p = 0.0
    cdef double anorm = 0.0
    for i in range(1, n + 1):
        for j in range(max(i - 1, 1), n + 1):
            anorm += fabs(a[i, j])
    nn = n
    while nn >= 1:
        its = 0
        while True:
            l = nn
            while l >= 2:
                s = fabs(a[l - 1, l - 1]) + fabs(a[l, l])
                if s == 0.0:
                    s = anorm
                if fabs(a[l, l - 1]) + s == s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
            else:
                y = a[nn - 1, nn - 1]
                w = a[nn, nn - 1] * a[nn - 1, nn]
                if l == nn - 1:
                    p = 0.5 * (y - x)
                    q = p * p + w
                    z = sqrt(fabs(q))
                    x += t
                    if q >= 0.0:
                        z = p + _sign(z, p)
                        wr[nn - 1] = x + z
                        wr[nn] = x + z
                        if z != 0.0:
                            wr[nn] = x - w / z
                        wi[nn - 1] = 0.0
                        wi[nn] = 0.0
                    else:
                        wr[nn - 1] = x + p
                        wr[nn] = x + p
                        wi[nn - 1] = -z
                        wi[nn] = z
                    nn -= 2
                else:
                    if total >= max_iter:
                        raise ConvergenceError(
                            f"QR iteration cap {max_iter} reached (norm={anorm:.3e})"
                        )
                    if its > 0 and its % 10 == 0:
                        t += x
                        for i in range(1, nn + 1):
                            a[i, i] -= x
                        s = fabs(a[nn, nn - 1]) + fabs(a[nn - 1, nn - 2])
                        x = 0.75 * s
                        y = x
                        w = -0.4375 * s * s
                    its += 1
                    total += 1
                    m = nn - 2
                    while m >= l:
                        z = a[m, m]
                        r = x - z
                        s = y - z
                        p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                        q = a[m + 1, m + 1] - z - r - s
                        r = a[m + 2, m + 1]
                        s = fabs(p) + fabs(q) + fabs(r)
                        p /= s
                        q /= s
                        r /= s
                        if m == l:
                            break
                        u = fabs(a[m, m - 1]) * (fabs(q) + fabs(r))
                        v = fabs(p) * (fabs(a[m - 1, m - 1]) + fabs(z) + fabs(a[m + 1, m + 1]))
                        if u + v == v:
                            break
                        m -= 1
                    for i in range(m + 2, nn + 1):
                        a[i, i - 2] = 0.0
                        if i != m + 2:
                            a[i, i - 3] = 0.0
                    for k in range(m, nn):
                        if k != m:
                            p = a[k, k - 1]
                            q = a[k + 1, k - 1]
                            r = 0.0
                            if k != nn - 1:
                                r = a[k + 2, k - 1]
                            x = fabs(p) + fabs(q) + fabs(r)
                            if x != 0.0:
                                p /= x
                                q /= x
                                r /= x
                        s = _sign(sqrt(p * p + q * q + r * r), p)
                        if s != 0.0:
                            if k == m:
                                if l != m:
                                    a[k, k - 1] = -a[k, k - 1]
                            else:
                                a[k, k - 1] = -s * x
                            p += s
                            x = p / s
                            y = q / s
                            z = r / s
                            q /= p
                            r /= p
                            for j in range(k, nn + 1):
                                p = a[k, j] + q * a[k + 1, j]
                                if k != nn - 1:
                                    p += r * a[k + 2, j]
                                    a[k + 2, j] -= p * z
                                a[k + 1, j] -= p * y
                                a[k, j] -= p * x
                            mmin = nn if nn < k + 3 else k + 3
                            for i in range(l, mmin + 1):
                                p = x * a[i, k] + y * a[i, k + 1]
                                if k != nn - 1:
                                    p += z * a[i, k + 2]
                                    a[i, k + 2] -= p * r
                                a[i, k + 1] -= p * q
                                a[i, k] -= p
            if l >= nn - 1:
                break
    return wr_arr[1:].copy(), wi_arr[1:].copy(), total


def gl_march(solve_mat, had, coeffs, x0, pos, hist, Py_ssize_t memory, double limit):
    cdef double[:, ::1] S = np.ascontiguousarray(solve_mat, dtype=np.float64)
    cdef double[:, ::1] HD = np.ascontiguousarray(had, dtype=np.float64)
    cdef double[::1] c = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef double[::1] X0 = np.ascontiguousarray(x0, dtype=np.float64)
    cdef double[::1] P = np.ascontiguousarray(pos, dtype=np.float64)
    cdef double[:, ::1] HI = np.ascontiguousarray(hist, dtype=np.float64)
    cdef Py_ssize_t n = X0.shape[0]
    cdef Py_ssize_t steps = P.shape[0] - 1
    xs_arr = np.zeros((steps + 1, n))
    cdef double[:, ::1] xs = xs_arr
    dev_arr = np.zeros((steps + 1, n))
    cdef double[:, ::1] dev = dev_arr
    tmp_arr = np.zeros(3 * n)
    cdef double[::1] conv = tmp_arr[:n]
    cdef double[::1] xd = tmp_arr[n:2 * n]
    cdef double[::1] rhs = tmp_arr[2 * n:]
    cdef Py_ssize_t k, j, i, r, mm, idx
    cdef double u, f, acc, nrm
    for i in range(n):
        xs[0, i] = X0[i]
    for k in range(1, steps + 1):
        mm = k if k < memory else memory
        for i in range(n):
            conv[i] = 0.0
        for j in range(1, mm + 1):
            for i in range(n):
                conv[i] += c[j] * dev[k - j, i]
        u = P[k]
        if u < 0.0:
            for i in range(n):
                xd[i] = HI[k, i]
        else:
            idx = <Py_ssize_t> floor(u)
            if idx >= k - 1:
                for i in range(n):
                    xd[i] = xs[k - 1, i]
            else:
                f = u - idx
                for i in range(n):
                    xd[i] = (1.0 - f) * xs[idx, i] + f * xs[idx + 1, i]
        for r in range(n):
            acc = X0[r] - conv[r]
            for i in range(n):
                acc += HD[r, i] * xd[i]
            rhs[r] = acc
        nrm = 0.0
        for r in range(n):
            acc = 0.0
            for i in range(n):
                acc += S[r, i] * rhs[i]
            xs[k, r] = acc
            dev[k, r] = acc - X0[r]
            nrm += acc * acc
        nrm = sqrt(nrm)
        if not isfinite(nrm) or nrm > limit:
            return xs_arr[:k + 1].copy(), k, True
    return xs_arr, steps, False
