"""Fused per-step kernel, JIT-compiled when numba is available.

Mirrors the numpy step in engine.py exactly (same stencils, same update
order, same coupling rules); evolve() uses it for the inner loop, while
the numpy path remains the reference implementation and the fallback.
A regression test holds the two paths together.

out vector layout:
    0 status   0 ok | 1 Htilde<=0 | 2 f<=0 | 3 chart convexity | 4 tip crossed
    1 dt
    2 k_left   first interior index free of the left chart
    3 k_right  first index past the free range (right chart onset)
    4 max f_xx over the free interior range
    5 min normalized g_yy over both charts
    6 offending node index for status != 0
    7 max f after the update
"""

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:          # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap if not (args and callable(args[0])) else args[0]

SLAVE_FRAC = 0.7


@njit(cache=True)
def step_kernel(x, f, g, y, u, ym, hy, eps, saf, dt_floor,
                rhs, fxx_buf, phi, x2, f2, g2, out):
    n = x.shape[0]
    m = g.shape[1]
    h = x[2] - x[1]
    h2 = h * h

    # ---- interior system ----
    dmax = 0.0
    for i in range(1, n - 1):
        fi = f[i]
        if fi <= 0.0:
            out[0] = 2.0
            out[6] = i
            return
        if i == 1:
            fx = (-3.0 * f[1] + 4.0 * f[2] - f[3]) / (2.0 * h)
            fxx = (2.0 * f[1] - 5.0 * f[2] + 4.0 * f[3] - f[4]) / h2
        elif i == n - 2:
            fx = (3.0 * f[n - 2] - 4.0 * f[n - 3] + f[n - 4]) / (2.0 * h)
            fxx = (2.0 * f[n - 2] - 5.0 * f[n - 3] + 4.0 * f[n - 4] - f[n - 5]) / h2
        else:
            fx = (f[i + 1] - f[i - 1]) / (2.0 * h)
            fxx = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2
        ht = -fi * fxx + fx * fx + 1.0
        if ht <= 0.0:
            out[0] = 1.0
            out[6] = i
            return
        w2 = 1.0 + fx * fx
        r = fxx / ht
        dc = w2 / (ht * ht)
        if eps != 0.0:
            r -= eps * ht / (fi * w2)
            dc += eps / w2
        rhs[i] = r
        fxx_buf[i] = fxx
        if dc > dmax:
            dmax = dc
    dt = saf * h2 / (2.0 * dmax)

    # ---- chart systems ----
    min_gyy = 1e300
    phimax = 0.0
    for row in range(2):
        sgn = 1.0 - 2.0 * row
        hyr = hy[row]
        hy2 = hyr * hyr
        dchmax = 0.0
        for j in range(m):
            if j == 0:
                gy = 0.0
                gyy = sgn * 2.0 * (g[row, 1] - g[row, 0]) / hy2
            elif j == m - 1:
                gy = sgn * (3.0 * g[row, m - 1] - 4.0 * g[row, m - 2]
                            + g[row, m - 3]) / (2.0 * hyr)
                gyy = sgn * (2.0 * g[row, m - 1] - 5.0 * g[row, m - 2]
                             + 4.0 * g[row, m - 3] - g[row, m - 4]) / hy2
            else:
                gy = sgn * (g[row, j + 1] - g[row, j - 1]) / (2.0 * hyr)
                gyy = sgn * (g[row, j + 1] - 2.0 * g[row, j] + g[row, j - 1]) / hy2
            if gyy < min_gyy:
                min_gyy = gyy
            w2 = 1.0 + gy * gy
            wt = y[row, j] * gyy + gy * w2
            if j == 0:
                p = 0.5 * gyy
                if eps != 0.0:
                    p += 2.0 * eps * gyy
                dc = 0.5 + 3.0 * eps
            else:
                if wt <= 0.0 and j < m - 2:
                    out[0] = 3.0
                    out[6] = row * m + j
                    return
                p = gyy * gy / wt if wt != 0.0 else 0.0
                if eps != 0.0:
                    p += eps * wt / (y[row, j] * w2)
                if j < m - 2:
                    dc = gy * gy * w2 / (wt * wt)
                    if eps != 0.0:
                        dc += eps / w2
                else:
                    dc = 0.0
            phi[row, j] = p
            if dc > dchmax:
                dchmax = dc
            if j < m - 2 and abs(p) > phimax:
                phimax = abs(p)
        dtc = saf * hy2 / (2.0 * dchmax)
        if dtc < dt:
            dt = dtc
    if phimax > 0.0:
        cap = 0.2 * h / phimax
        if cap < dt:
            dt = cap
    if dt < dt_floor:
        out[0] = 5.0
        out[1] = dt
        return

    # ---- explicit update ----
    fmax = 0.0
    for i in range(n):
        x2[i] = x[i]
        if 0 < i < n - 1:
            f2[i] = f[i] + dt * rhs[i]
        else:
            f2[i] = 0.0
        if f2[i] > fmax:
            fmax = f2[i]
    for row in range(2):
        sgn = 1.0 - 2.0 * row
        for j in range(m):
            g2[row, j] = g[row, j] + dt * sgn * phi[row, j]
    x2[0] = g2[0, 0]
    x2[n - 1] = g2[1, 0]
    if x2[0] >= x2[1] or x2[n - 1] <= x2[n - 2]:
        out[0] = 4.0
        return

    # ---- slave the two outermost chart nodes onto the interior ----
    for row in range(2):
        edge = g2[row, m - 1]
        j = np.searchsorted(x2, edge)
        lo = j - 5 if j - 5 > 1 else 1
        hi = j + 5 if j + 5 < n - 1 else n - 1
        size = hi - lo
        if size >= 4:
            ok = True
            if row == 0:
                for k in range(lo + 1, hi):
                    if f2[k] <= f2[k - 1]:
                        ok = False
                        break
            else:
                for k in range(lo + 1, hi):
                    if f2[k] >= f2[k - 1]:
                        ok = False
                        break
            if ok:
                u0 = u[row, m - 2]
                u1 = u[row, m - 1]
                lo_u = f2[lo] * f2[lo] if row == 0 else f2[hi - 1] * f2[hi - 1]
                hi_u = f2[hi - 1] * f2[hi - 1] if row == 0 else f2[lo] * f2[lo]
                if u0 >= lo_u and u1 <= hi_u:
                    for col in range(2):
                        uq = u[row, m - 2 + col]
                        # bracket uq within the window (ascending in u)
                        if row == 0:
                            k = lo
                            while k < hi - 1 and f2[k + 1] * f2[k + 1] < uq:
                                k += 1
                            i0 = k - 1 if k - 1 > lo else lo
                            if i0 + 3 > hi - 1:
                                i0 = hi - 4
                            ua = f2[i0] * f2[i0]
                            ub = f2[i0 + 1] * f2[i0 + 1]
                            uc = f2[i0 + 2] * f2[i0 + 2]
                            ud = f2[i0 + 3] * f2[i0 + 3]
                            xa, xb = x2[i0], x2[i0 + 1]
                            xc, xd = x2[i0 + 2], x2[i0 + 3]
                        else:
                            k = hi - 1
                            while k > lo and f2[k - 1] * f2[k - 1] < uq:
                                k -= 1
                            i0 = k + 1 if k + 1 < hi - 1 else hi - 1
                            if i0 - 3 < lo:
                                i0 = lo + 3
                            ua = f2[i0] * f2[i0]
                            ub = f2[i0 - 1] * f2[i0 - 1]
                            uc = f2[i0 - 2] * f2[i0 - 2]
                            ud = f2[i0 - 3] * f2[i0 - 3]
                            xa, xb = x2[i0], x2[i0 - 1]
                            xc, xd = x2[i0 - 2], x2[i0 - 3]
                        w0 = ((uq - ub) * (uq - uc) * (uq - ud)
                              / ((ua - ub) * (ua - uc) * (ua - ud)))
                        w1 = ((uq - ua) * (uq - uc) * (uq - ud)
                              / ((ub - ua) * (ub - uc) * (ub - ud)))
                        w2l = ((uq - ua) * (uq - ub) * (uq - ud)
                               / ((uc - ua) * (uc - ub) * (uc - ud)))
                        w3 = ((uq - ua) * (uq - ub) * (uq - uc)
                              / ((ud - ua) * (ud - ub) * (ud - uc)))
                        g2[row, m - 2 + col] = (w0 * xa + w1 * xb
                                                + w2l * xc + w3 * xd)

    # ---- sync near-tip interior nodes from the charts ----
    # left
    ue = (SLAVE_FRAC * ym[0]) ** 2
    j = np.searchsorted(u[0], ue)
    if j <= 0:
        edge = g2[0, 0]
    elif j >= m:
        edge = g2[0, m - 1]
    else:
        t_ = (ue - u[0, j - 1]) / (u[0, j] - u[0, j - 1])
        edge = g2[0, j - 1] + t_ * (g2[0, j] - g2[0, j - 1])
    k_left = np.searchsorted(x2, edge)
    if k_left > 1:
        if k_left > n - 2:
            k_left = n - 2
        p = 0
        for i in range(1, k_left):
            xi = x2[i]
            while p < m - 1 and g2[0, p + 1] < xi:
                p += 1
            if p >= m - 1:
                f2[i] = y[0, m - 1]
            else:
                den = g2[0, p + 1] - g2[0, p]
                t_ = (xi - g2[0, p]) / den if den != 0.0 else 0.0
                if t_ < 0.0:
                    t_ = 0.0
                uu = u[0, p] + t_ * (u[0, p + 1] - u[0, p])
                f2[i] = np.sqrt(uu)
    else:
        k_left = 1
    # right
    ue = (SLAVE_FRAC * ym[1]) ** 2
    j = np.searchsorted(u[1], ue)
    if j <= 0:
        edge = g2[1, 0]
    elif j >= m:
        edge = g2[1, m - 1]
    else:
        t_ = (ue - u[1, j - 1]) / (u[1, j] - u[1, j - 1])
        edge = g2[1, j - 1] + t_ * (g2[1, j] - g2[1, j - 1])
    k_right = np.searchsorted(x2, edge, side="right")
    if k_right < n - 1:
        if k_right < 2:
            k_right = 2
        p = 0
        for idx in range(n - 2 - k_right + 1):
            i = n - 2 - idx
            xi = x2[i]
            while p < m - 1 and g2[1, p + 1] > xi:
                p += 1
            if p >= m - 1:
                f2[i] = y[1, m - 1]
            else:
                den = g2[1, p + 1] - g2[1, p]
                t_ = (xi - g2[1, p]) / den if den != 0.0 else 0.0
                if t_ < 0.0:
                    t_ = 0.0
                uu = u[1, p] + t_ * (u[1, p + 1] - u[1, p])
                f2[i] = np.sqrt(uu)
    else:
        k_right = n - 1

    # max f_xx over the free interior range (pre-update derivatives)
    mx = -1e300
    for i in range(k_left, k_right):
        if fxx_buf[i] > mx:
            mx = fxx_buf[i]
    fmax = 0.0
    for i in range(n):
        if f2[i] > fmax:
            fmax = f2[i]

    out[0] = 0.0
    out[1] = dt
    out[2] = k_left
    out[3] = k_right
    out[4] = mx
    out[5] = min_gyy
    out[7] = fmax
