# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: ordered matrix product, real eigensolver, 2-D Euler trajectories."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, tanh, copysign, isfinite, NAN

cnp.import_array()

cdef double DBL_EPS = 2.220446049250313e-16
cdef double RADIX = 2.0


def matmul_lr(a, b):
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] bt = np.ascontiguousarray(np.asarray(b, dtype=np.float64).T)
    cdef Py_ssize_t n = av.shape[0], p = av.shape[1], q = bt.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double s
    if bt.shape[1] != p:
        raise ValueError(f"inner dimensions differ: {p} vs {bt.shape[1]}")
    out = np.empty((n, q), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(q):
                s = 0.0
                for k in range(p):
                    s = s + av[i, k] * bt[j, k]
                o[i, j] = s
    return out


cdef void _balance(double[:, ::1] a, Py_ssize_t n) noexcept nogil:
    cdef int done = 0
    cdef Py_ssize_t i, j
    cdef double r, c, g, f, s, sqrdx = RADIX * RADIX
    while not done:
        done = 1
        for i in range(n):
            r = 0.0
            c = 0.0
            for j in range(n):
                if j != i:
                    c += fabs(a[j, i])
                    r += fabs(a[i, j])
            if c != 0.0 and r != 0.0:
                g = r / RADIX
                f = 1.0
                s = c + r
                while c < g:
                    f *= RADIX
                    c *= sqrdx
                g = r * RADIX
                while c > g:
                    f /= RADIX
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = 0
                    g = 1.0 / f
                    for j in range(n):
                        a[i, j] *= g
                    for j in range(n):
                        a[j, i] *= f


cdef void _hessenberg(double[:, ::1] a, double[::1] v, Py_ssize_t n) noexcept nogil:
    # Householder similarity reduction; reflectors are not accumulated
    cdef Py_ssize_t k, i, j, L
    cdef double alpha, norm2, vnorm2, s, beta
    for k in range(n - 2):
        norm2 = 0.0
        for i in range(k + 1, n):
            norm2 += a[i, k] * a[i, k]
        if norm2 == 0.0:
            continue
        alpha = -copysign(sqrt(norm2), a[k + 1, k])
        for i in range(k + 1, n):
            v[i] = a[i, k]
        v[k + 1] -= alpha
        vnorm2 = 0.0
        for i in range(k + 1, n):
            vnorm2 += v[i] * v[i]
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        for j in range(k, n):
            s = 0.0
            for i in range(k + 1, n):
                s += v[i] * a[i, j]
            s *= beta
            for i in range(k + 1, n):
                a[i, j] -= s * v[i]
        for i in range(n):
            s = 0.0
            for j in range(k + 1, n):
                s += a[i, j] * v[j]
            s *= beta
            for j in range(k + 1, n):
                a[i, j] -= s * v[j]
        a[k + 1, k] = alpha
        for i in range(k + 2, n):
            a[i, k] = 0.0


cdef int _hqr(double[:, ::1] a, Py_ssize_t n, double[::1] wr, double[::1] wi,
              double tol, long max_sweeps) noexcept nogil:
    """Francis double-shift QR on an upper Hessenberg matrix; 0 on success."""
    cdef Py_ssize_t nn, m, l, k, j, i, mmin
    cdef long its, total = 0
    cdef double z = 0.0, y = 0.0, x = 0.0, w = 0.0, v, u, t = 0.0, s, r = 0.0
    cdef double q = 0.0, p = 0.0, anorm = 0.0
    for i in range(n):
        for j in range(i - 1 if i > 0 else 0, n):
            anorm += fabs(a[i, j])
    nn = n - 1
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l >= 1:
                s = fabs(a[l - 1, l - 1]) + fabs(a[l, l])
                if s == 0.0:
                    s = anorm
                if fabs(a[l, l - 1]) <= tol * s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = sqrt(fabs(q))
                x += t
                if q >= 0.0:
                    z = p + copysign(z, p)
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
                break
            if total >= max_sweeps:
                for i in range(nn + 1):
                    wr[i] = NAN
                    wi[i] = NAN
                return 1
            if its > 0 and its % 10 == 0:
                t += x
                for i in range(nn + 1):
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
                if u <= DBL_EPS * v:
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
                s = copysign(sqrt(p * p + q * q + r * r), p)
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
    return 0


def eigvals_real(a, double tol=1e-12, long max_sweeps=-1):
    """Return (re, im, converged) for a real square matrix."""
    work = np.array(a, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = work.shape[0]
    if work.ndim != 2 or work.shape[1] != n:
        raise ValueError("eigvals_real needs a square matrix")
    if max_sweeps < 0:
        max_sweeps = 100 * n
    wr_arr = np.zeros(n)
    wi_arr = np.zeros(n)
    scratch = np.zeros(n)
    cdef double[:, ::1] av = work
    cdef double[::1] wr = wr_arr, wi = wi_arr, v = scratch
    cdef int status = 0
    if n == 0:
        return wr_arr, wi_arr, True
    with nogil:
        _balance(av, n)
        _hessenberg(av, v, n)
        status = _hqr(av, n, wr, wi, tol, max_sweeps)
    return wr_arr, wi_arr, status == 0


def euler_portrait(m, bint residual_tanh, h0s, inputs, double eps, long steps,
                   double cutoff=1e12):
    """Integrate 2-D trajectories; returns (points, lengths, diverged)."""
    cdef const double[:, ::1] mv = np.ascontiguousarray(m, dtype=np.float64)
    cdef const double[:, ::1] h0v = np.ascontiguousarray(h0s, dtype=np.float64)
    cdef Py_ssize_t K = h0v.shape[0], kk, t
    cdef bint has_input = inputs is not None
    cdef const double[:, :, ::1] xv
    if has_input:
        xv = np.ascontiguousarray(inputs, dtype=np.float64)
    else:
        xv = np.zeros((1, 1, 2))
    points = np.zeros((K, steps + 1, 2))
    lengths = np.full(K, steps + 1, dtype=np.int64)
    diverged = np.zeros(K, dtype=np.bool_)
    cdef double[:, :, ::1] pv = points
    cdef long long[::1] lv = lengths
    cdef cnp.npy_bool[::1] dv = diverged
    cdef double h0, h1, a0, a1
    with nogil:
        for kk in range(K):
            h0 = h0v[kk, 0]
            h1 = h0v[kk, 1]
            pv[kk, 0, 0] = h0
            pv[kk, 0, 1] = h1
            for t in range(1, steps + 1):
                a0 = mv[0, 0] * h0 + mv[0, 1] * h1
                a1 = mv[1, 0] * h0 + mv[1, 1] * h1
                if residual_tanh:
                    if has_input:
                        a0 = a0 + xv[kk, t - 1, 0]
                        a1 = a1 + xv[kk, t - 1, 1]
                    a0 = tanh(a0)
                    a1 = tanh(a1)
                h0 = h0 + eps * a0
                h1 = h1 + eps * a1
                if not (isfinite(h0) and isfinite(h1)) or fabs(h0) > cutoff or fabs(h1) > cutoff:
                    lv[kk] = t
                    dv[kk] = True
                    break
                pv[kk, t, 0] = h0
                pv[kk, t, 1] = h1
    return points, lengths, diverged
