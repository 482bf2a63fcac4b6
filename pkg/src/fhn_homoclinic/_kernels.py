"""Compiled right-hand sides and the DOP853 stepping loop.

Everything here is numba-jitted and works on plain float64 arrays; the
Python-facing wrappers live in :mod:`fhn_homoclinic.integrator`.
"""

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

# right-hand side selectors
FHN_SLOW = 0
FHN_FAST = 1
LAYER = 2
LINEAR_MODEL = 3
FHN_SLOW_VARIATIONAL = 4

# termination codes
HORIZON = 0
SECTION = 1
ESCAPED = 2
UNDERFLOW = 3
MAX_STEPS = 4

N_STAGES = 12
A = np.ascontiguousarray(_dop.A[:N_STAGES, :N_STAGES])
B = np.ascontiguousarray(_dop.B)
C = np.ascontiguousarray(_dop.C[:N_STAGES])
E3 = np.ascontiguousarray(_dop.E3)
E5 = np.ascontiguousarray(_dop.E5)
D = np.ascontiguousarray(_dop.D)
A_EXTRA = np.ascontiguousarray(_dop.A[N_STAGES + 1:])
C_EXTRA = np.ascontiguousarray(_dop.C[N_STAGES + 1:])
N_EXT = _dop.N_STAGES_EXTENDED
N_POLY = _dop.INTERPOLATOR_POWER

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


@njit(cache=True, nogil=True)
def rhs(kind, t, y, par):
    out = np.empty(y.shape[0])
    if kind == LINEAR_MODEL:
        beta, alpha, gamma = par[0], par[1], par[2]
        out[0] = -beta * y[0] - alpha * y[1]
        out[1] = alpha * y[0] - beta * y[1]
        out[2] = gamma
        return out
    p, s, delta, a, eps = par[0], par[1], par[2], par[3], par[4]
    x1, x2, yy = y[0], y[1], y[2]
    f = x1 * (x1 - 1.0) * (a - x1)
    g1 = x2
    g2 = (s * x2 - f + yy - p) / delta
    g3 = (x1 - yy) / s
    if kind == FHN_SLOW or kind == FHN_SLOW_VARIATIONAL:
        out[0] = g1 / eps
        out[1] = g2 / eps
        out[2] = g3
    elif kind == FHN_FAST:
        out[0] = g1
        out[1] = g2
        out[2] = eps * g3
    else:  # LAYER
        out[0] = g1
        out[1] = g2
        out[2] = 0.0
    if kind == FHN_SLOW_VARIATIONAL:
        # d/dt M = J M with M stored row-major in y[3:12]
        df = -3.0 * x1 * x1 + 2.0 * (1.0 + a) * x1 - a
        j00, j01, j02 = 0.0, 1.0 / eps, 0.0
        j10, j11, j12 = -df / (delta * eps), s / (delta * eps), 1.0 / (delta * eps)
        j20, j21, j22 = 1.0 / s, 0.0, -1.0 / s
        for c in range(3):
            m0 = y[3 + c]
            m1 = y[6 + c]
            m2 = y[9 + c]
            out[3 + c] = j00 * m0 + j01 * m1 + j02 * m2
            out[6 + c] = j10 * m0 + j11 * m1 + j12 * m2
            out[9 + c] = j20 * m0 + j21 * m1 + j22 * m2
    return out


@njit(cache=True, nogil=True)
def dense_eval(F, y_old, x):
    """Evaluate the DOP853 interpolant at normalized step fraction x."""
    n = y_old.shape[0]
    out = np.zeros(n)
    for k in range(N_POLY - 1, -1, -1):
        i = N_POLY - 1 - k
        for j in range(n):
            out[j] += F[k, j]
            if i % 2 == 0:
                out[j] *= x
            else:
                out[j] *= 1.0 - x
    for j in range(n):
        out[j] += y_old[j]
    return out


@njit(cache=True, nogil=True)
def _dense_coeffs(kind, par, t_old, y_old, y_new, f_old, f_new, h, K):
    n = y_old.shape[0]
    for s in range(N_STAGES + 1, N_EXT):
        dy = np.zeros(n)
        for k in range(s):
            coef = A_EXTRA[s - N_STAGES - 1, k]
            if coef != 0.0:
                for j in range(n):
                    dy[j] += coef * K[k, j]
        yk = np.empty(n)
        for j in range(n):
            yk[j] = y_old[j] + h * dy[j]
        K[s] = rhs(kind, t_old + C_EXTRA[s - N_STAGES - 1] * h, yk, par)
    F = np.zeros((N_POLY, n))
    for j in range(n):
        dlt = y_new[j] - y_old[j]
        F[0, j] = dlt
        F[1, j] = h * f_old[j] - dlt
        F[2, j] = 2.0 * dlt - h * (f_new[j] + f_old[j])
    for r in range(N_POLY - 3):
        for k in range(N_EXT):
            coef = D[r, k]
            if coef != 0.0:
                for j in range(n):
                    F[3 + r, j] += h * coef * K[k, j]
    return F


@njit(cache=True, nogil=True)
def _initial_step(kind, par, t0, y0, f0, direction, rtol, atol, max_step):
    n = y0.shape[0]
    d0 = 0.0
    d1 = 0.0
    for j in range(n):
        sc = atol + abs(y0[j]) * rtol
        d0 += (y0[j] / sc) ** 2
        d1 += (f0[j] / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, max_step)
    y1 = y0 + h0 * direction * f0
    f1 = rhs(kind, t0 + h0 * direction, y1, par)
    d2 = 0.0
    for j in range(n):
        sc = atol + abs(y0[j]) * rtol
        d2 += ((f1[j] - f0[j]) / sc) ** 2
    d2 = np.sqrt(d2 / n) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100.0 * h0, h1, max_step)


@njit(cache=True, nogil=True)
def integrate_kernel(kind, par, t0, y0, t_end, rtol, atol, max_step, escape_radius,
                     ev_idx, ev_val, ev_dir, ev_skip_start, record, max_steps):
    """Adaptive DOP853 integration from t0 towards t_end.

    Returns ``(status, ts, ys, Fs, t_event, y_event)``; when ``record`` is
    false only the first and last node are returned and ``Fs`` is empty.
    ``ev_idx < 0`` disables event detection.
    """
    n = y0.shape[0]
    direction = 1.0 if t_end >= t0 else -1.0
    cap = 256 if record else 2
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    Fs = np.empty((cap if record else 0, N_POLY, n))
    ts[0] = t0
    ys[0] = y0
    count = 1
    t_event = np.nan
    y_event = np.full(n, np.nan)

    t = t0
    y = y0.copy()
    f = rhs(kind, t, y, par)

    if ev_idx >= 0 and not ev_skip_start and y[ev_idx] == ev_val:
        return SECTION, ts[:1], ys[:1], Fs[:0], t, y.copy()

    if t_end == t0:
        return HORIZON, ts[:1], ys[:1], Fs[:0], t_event, y_event

    h_abs = _initial_step(kind, par, t0, y, f, direction, rtol, atol, max_step)
    K = np.empty((N_EXT, n))
    err_exp = -1.0 / 8.0
    status = HORIZON
    n_steps = 0
    while True:
        if direction * (t - t_end) >= 0:
            status = HORIZON
            break
        if n_steps >= max_steps:
            status = MAX_STEPS
            break
        min_step = 1e-14 * max(1.0, abs(t))
        if h_abs > max_step:
            h_abs = max_step
        rejected = False
        accepted = False
        while not accepted:
            if h_abs < min_step:
                return UNDERFLOW, ts[:count], ys[:count], Fs[:count - 1 if record else 0], t_event, y_event
            h = h_abs * direction
            t_new = t + h
            if direction * (t_new - t_end) > 0:
                t_new = t_end
            h = t_new - t
            h_abs = abs(h)
            K[0] = f
            for s in range(1, N_STAGES):
                dy = np.zeros(n)
                for k in range(s):
                    coef = A[s, k]
                    if coef != 0.0:
                        for j in range(n):
                            dy[j] += coef * K[k, j]
                yk = np.empty(n)
                for j in range(n):
                    yk[j] = y[j] + h * dy[j]
                K[s] = rhs(kind, t + C[s] * h, yk, par)
            y_new = np.empty(n)
            for j in range(n):
                acc = 0.0
                for k in range(N_STAGES):
                    acc += B[k] * K[k, j]
                y_new[j] = y[j] + h * acc
            f_new = rhs(kind, t_new, y_new, par)
            K[N_STAGES] = f_new
            err5 = 0.0
            err3 = 0.0
            for j in range(n):
                sc = atol + max(abs(y[j]), abs(y_new[j])) * rtol
                e5 = 0.0
                e3 = 0.0
                for k in range(N_STAGES + 1):
                    e5 += E5[k] * K[k, j]
                    e3 += E3[k] * K[k, j]
                err5 += (e5 / sc) ** 2
                err3 += (e3 / sc) ** 2
            if err5 == 0.0 and err3 == 0.0:
                err = 0.0
            else:
                err = h_abs * err5 / np.sqrt((err5 + 0.01 * err3) * n)
            if not np.isfinite(err):
                err = 1e10
            if err < 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err ** err_exp)
                if rejected:
                    factor = min(1.0, factor)
                h_next = h_abs * factor
                accepted = True
            else:
                h_abs *= max(MIN_FACTOR, SAFETY * err ** err_exp)
                rejected = True
        n_steps += 1

        need_dense = record
        hit = False
        if ev_idx >= 0:
            g_old = y[ev_idx] - ev_val
            g_new = y_new[ev_idx] - ev_val
            skip = ev_skip_start and count == 1 and g_old == 0.0
            if not skip and ((g_old < 0.0 and g_new >= 0.0 and ev_dir >= 0)
                             or (g_old > 0.0 and g_new <= 0.0 and ev_dir <= 0)):
                hit = True
                need_dense = True
        if need_dense:
            F = _dense_coeffs(kind, par, t, y, y_new, f, f_new, h, K)
        else:
            F = np.empty((N_POLY, n))

        if hit:
            lo, hi = 0.0, 1.0
            g_lo = g_old
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                gm = dense_eval(F, y, mid)[ev_idx] - ev_val
                if (gm < 0.0) == (g_lo < 0.0) and gm != 0.0:
                    lo = mid
                    g_lo = gm
                else:
                    hi = mid
                if (hi - lo) * h_abs < 1e-9 * max(1.0, abs(t)):
                    break
            x = 0.5 * (lo + hi)
            for _ in range(8):
                ye = dense_eval(F, y, x)
                gv = ye[ev_idx] - ev_val
                dg = rhs(kind, t + x * h, ye, par)[ev_idx] * h
                if dg == 0.0:
                    break
                x_new = x - gv / dg
                if x_new < 0.0 or x_new > 1.0:
                    break
                conv = abs(x_new - x) * h_abs < 1e-12 * max(1.0, abs(t))
                x = x_new
                if conv:
                    break
            t_event = t + x * h
            y_event = dense_eval(F, y, x)
            # the full final step is kept; the event lies inside it
            if record:
                if count + 1 > ts.shape[0]:
                    ts, ys, Fs = _grow(ts, ys, Fs)
                Fs[count - 1] = F
                ts[count] = t_new
                ys[count] = y_new
                count += 1
            else:
                ts[1] = t_new
                ys[1] = y_new
                count = 2
            return SECTION, ts[:count], ys[:count], Fs[:count - 1 if record else 0], t_event, y_event

        if record:
            if count + 1 > ts.shape[0]:
                ts, ys, Fs = _grow(ts, ys, Fs)
            Fs[count - 1] = F
            ts[count] = t_new
            ys[count] = y_new
            count += 1
        else:
            ts[1] = t_new
            ys[1] = y_new
            count = 2
        t = t_new
        y = y_new
        f = f_new
        h_abs = h_next

        if escape_radius > 0:
            nrm = 0.0
            for j in range(min(n, 3)):
                nrm += y[j] * y[j]
            if np.sqrt(nrm) > escape_radius or not np.isfinite(nrm):
                status = ESCAPED
                break

    return status, ts[:count], ys[:count], Fs[:count - 1 if record else 0], t_event, y_event


@njit(cache=True, nogil=True)
def _grow(ts, ys, Fs):
    cap = ts.shape[0] * 2
    ts2 = np.empty(cap)
    ys2 = np.empty((cap, ys.shape[1]))
    Fs2 = np.empty((cap, Fs.shape[1], Fs.shape[2]))
    ts2[:ts.shape[0]] = ts
    ys2[:ys.shape[0]] = ys
    Fs2[:Fs.shape[0]] = Fs
    return ts2, ys2, Fs2
