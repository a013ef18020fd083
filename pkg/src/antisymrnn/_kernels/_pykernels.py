"""Pure-Python/numpy versions of the compiled kernels.

Same algorithms and operation order as ``_ckernels`` where it is cheap to
keep them; results agree to rounding, and ``matmul_lr`` agrees bitwise.
"""
import math

import numpy as np

_EPS = np.finfo(np.float64).eps
_RADIX = 2.0


def matmul_lr(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions differ: {a.shape[1]} vs {b.shape[0]}")
    out = np.zeros((a.shape[0], b.shape[1]))
    # one rank-1 update per k keeps the per-entry summation order left-to-right
    for k in range(a.shape[1]):
        out += a[:, k:k + 1] * b[k:k + 1, :]
    return out


def _balance(a):
    n = a.shape[0]
    sqrdx = _RADIX * _RADIX
    done = False
    while not done:
        done = True
        for i in range(n):
            c = float(np.abs(a[:, i]).sum() - abs(a[i, i]))
            r = float(np.abs(a[i, :]).sum() - abs(a[i, i]))
            if c != 0.0 and r != 0.0:
                g = r / _RADIX
                f = 1.0
                s = c + r
                while c < g:
                    f *= _RADIX
                    c *= sqrdx
                g = r * _RADIX
                while c > g:
                    f /= _RADIX
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    a[i, :] *= 1.0 / f
                    a[:, i] *= f


def _hessenberg(a):
    n = a.shape[0]
    for k in range(n - 2):
        x = a[k + 1:, k]
        norm = math.sqrt(float(x @ x))
        if norm == 0.0:
            continue
        alpha = -math.copysign(norm, x[0])
        v = x.copy()
        v[0] -= alpha
        vnorm2 = float(v @ v)
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        a[k + 1:, k:] -= np.outer(v, beta * (v @ a[k + 1:, k:]))
        a[:, k + 1:] -= np.outer(beta * (a[:, k + 1:] @ v), v)
        a[k + 1, k] = alpha
        a[k + 2:, k] = 0.0


def _hqr(a, tol, max_sweeps):
    n = a.shape[0]
    wr = np.zeros(n)
    wi = np.zeros(n)
    anorm = sum(float(np.abs(a[i, max(i - 1, 0):]).sum()) for i in range(n))
    t = 0.0
    total = 0
    x = y = w = 0.0
    nn = n - 1
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l >= 1:
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) <= tol * s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = float(a[nn, nn])
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = float(a[nn - 1, nn - 1])
            w = float(a[nn, nn - 1] * a[nn - 1, nn])
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = math.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + math.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                    wi[nn - 1] = wi[nn] = 0.0
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1] = -z
                    wi[nn] = z
                nn -= 2
                break
            if total >= max_sweeps:
                wr[:nn + 1] = np.nan
                wi[:nn + 1] = np.nan
                return wr, wi, False
            if its > 0 and its % 10 == 0:
                t += x
                idx = np.arange(nn + 1)
                a[idx, idx] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                x = y = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            total += 1
            m = nn - 2
            while m >= l:
                z = float(a[m, m])
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = float(a[m + 2, m + 1])
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u <= _EPS * v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = float(a[k, k - 1])
                    q = float(a[k + 1, k - 1])
                    r = float(a[k + 2, k - 1]) if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = math.copysign(math.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
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
                last = k != nn - 1
                pr = a[k, k:nn + 1] + q * a[k + 1, k:nn + 1]
                if last:
                    pr = pr + r * a[k + 2, k:nn + 1]
                    a[k + 2, k:nn + 1] -= pr * z
                a[k + 1, k:nn + 1] -= pr * y
                a[k, k:nn + 1] -= pr * x
                top = min(nn, k + 3) + 1
                pc = x * a[l:top, k] + y * a[l:top, k + 1]
                if last:
                    pc = pc + z * a[l:top, k + 2]
                    a[l:top, k + 2] -= pc * r
                a[l:top, k + 1] -= pc * q
                a[l:top, k] -= pc
    return wr, wi, True


def eigvals_real(a, tol=1e-12, max_sweeps=-1):
    """Return (re, im, converged) for a real square matrix."""
    work = np.array(a, dtype=np.float64, copy=True)
    if work.ndim != 2 or work.shape[0] != work.shape[1]:
        raise ValueError("eigvals_real needs a square matrix")
    n = work.shape[0]
    if max_sweeps < 0:
        max_sweeps = 100 * n
    if n == 0:
        return np.zeros(0), np.zeros(0), True
    _balance(work)
    _hessenberg(work)
    return _hqr(work, tol, max_sweeps)


def euler_portrait(m, residual_tanh, h0s, inputs, eps, steps, cutoff=1e12):
    """Integrate 2-D trajectories; returns (points, lengths, diverged)."""
    m = np.asarray(m, dtype=np.float64)
    h0s = np.asarray(h0s, dtype=np.float64)
    K = h0s.shape[0]
    points = np.zeros((K, steps + 1, 2))
    lengths = np.full(K, steps + 1, dtype=np.int64)
    diverged = np.zeros(K, dtype=bool)
    h = h0s.copy()
    points[:, 0] = h
    alive = np.ones(K, dtype=bool)
    for t in range(1, steps + 1):
        a0 = m[0, 0] * h[:, 0] + m[0, 1] * h[:, 1]
        a1 = m[1, 0] * h[:, 0] + m[1, 1] * h[:, 1]
        if residual_tanh:
            if inputs is not None:
                a0 = a0 + inputs[:, t - 1, 0]
                a1 = a1 + inputs[:, t - 1, 1]
            a0 = np.tanh(a0)
            a1 = np.tanh(a1)
        with np.errstate(over="ignore", invalid="ignore"):
            new = np.stack([h[:, 0] + eps * a0, h[:, 1] + eps * a1], axis=1)
            bad = alive & ~(np.isfinite(new).all(axis=1) & (np.abs(new) <= cutoff).all(axis=1))
        lengths[bad] = t
        diverged[bad] = True
        alive &= ~bad
        if not alive.any():
            break
        h = np.where(alive[:, None], new, h)
        points[alive, t] = h[alive]
    return points, lengths, diverged
