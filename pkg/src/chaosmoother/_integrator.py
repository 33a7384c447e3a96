"""Compiled Dormand-Prince 5(4) kernel for quadratic vector fields.

One kernel serves four right-hand sides selected by ``mode``:

0. the field ``-A u - B(u, u) + f``;
1. the field plus the variational equation ``dJ/dt = J_vf(u) J``
   (state packed as ``[u, vec(J)]`` with ``J`` row-major);
2. the exact perturbation equation
   ``dδ/dt = -A δ - B(u, δ) - B(δ, u + δ)`` along a reference trajectory
   ``u(t)`` read from a stored dense-output table;
3. the same perturbation equation integrated jointly with its reference
   (state packed as ``[u, δ]``).

Modes 2 and 3 keep perturbations far below machine epsilon relative to
``u`` representable, because ``δ`` is carried as its own variable and its
error control is purely relative.

Integration runs in a nonnegative pseudo-time ``s``; physical time is
``t0 + sign * s`` and the field is multiplied by ``sign``.
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_BLOWUP = 1
STATUS_UNDERFLOW = 2
STATUS_MAXSTEPS = 3

_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    -71.0 / 57600.0, 71.0 / 16695.0, -71.0 / 1920.0, 17253.0 / 339200.0, -22.0 / 525.0, 1.0 / 40.0)

# Continuous extension of order 4 (rows: stages, columns: powers θ..θ^4).
_P = np.array([
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
     -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
     87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
     -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
     701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0,
     -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
])


@njit(cache=True)
def bilinear(B, x, y, out):
    """``out_i = Σ_jk B[i, j, k] x_j y_k``."""
    d = B.shape[0]
    for i in range(d):
        acc = 0.0
        for j in range(d):
            xj = x[j]
            if xj == 0.0:
                continue
            row = B[i, j]
            s = 0.0
            for k in range(d):
                s += row[k] * y[k]
            acc += xj * s
        out[i] = acc


@njit(cache=True)
def field_jacobian(A, B, u, out):
    """``J_vf(u) = -A - B(·, u) - B(u, ·)``."""
    d = A.shape[0]
    for i in range(d):
        for j in range(d):
            s = -A[i, j]
            for k in range(d):
                s -= B[i, j, k] * u[k] + B[i, k, j] * u[k]
            out[i, j] = s


@njit(cache=True)
def _field(A, B, f, u, tmp, out):
    d = A.shape[0]
    bilinear(B, u, u, tmp)
    for i in range(d):
        s = f[i] - tmp[i]
        for j in range(d):
            s -= A[i, j] * u[j]
        out[i] = s


@njit(cache=True)
def _perturbation(A, B, u, dl, tmp1, tmp2, out):
    d = A.shape[0]
    # B(u, δ) + B(δ, u + δ)
    bilinear(B, u, dl, tmp1)
    for i in range(d):
        tmp2[i] = u[i] + dl[i]
    for i in range(d):
        acc = tmp1[i]
        for j in range(d):
            dj = dl[j]
            if dj == 0.0:
                continue
            s = 0.0
            for k in range(d):
                s += B[i, j, k] * tmp2[k]
            acc += dj * s
        for j in range(d):
            acc += A[i, j] * dl[j]
        out[i] = -acc


@njit(cache=True)
def dense_eval(t, ref_t, ref_h, ref_y, ref_q, out):
    """Evaluate a stored dense-output table at physical time ``t``."""
    n = ref_t.shape[0]
    # rightmost step whose start does not exceed t (table is time-increasing)
    lo, hi = 0, n - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if ref_t[mid] <= t:
            lo = mid
        else:
            hi = mid - 1
    k = lo
    h = ref_h[k]
    th = (t - ref_t[k]) / h
    if th < 0.0:
        th = 0.0
    if th > 1.0:
        th = 1.0
    p1 = th
    p2 = th * th
    p3 = p2 * th
    p4 = p3 * th
    m = ref_y.shape[1]
    for i in range(m):
        out[i] = ref_y[k, i] + h * (ref_q[k, i, 0] * p1 + ref_q[k, i, 1] * p2
                                    + ref_q[k, i, 2] * p3 + ref_q[k, i, 3] * p4)


@njit(cache=True)
def _rhs(mode, t, y, A, B, f, sign, ref_t, ref_h, ref_y, ref_q, w1, w2, w3, wj, out):
    d = A.shape[0]
    if mode == 0:
        _field(A, B, f, y, w1, out)
    elif mode == 1:
        _field(A, B, f, y[:d], w1, out[:d])
        field_jacobian(A, B, y[:d], wj)
        for i in range(d):
            for c in range(d):
                s = 0.0
                for m in range(d):
                    s += wj[i, m] * y[d + m * d + c]
                out[d + i * d + c] = s
    elif mode == 2:
        dense_eval(t, ref_t, ref_h, ref_y, ref_q, w3)
        _perturbation(A, B, w3, y, w1, w2, out)
    else:
        _field(A, B, f, y[:d], w1, out[:d])
        _perturbation(A, B, y[:d], y[d:], w1, w2, out[d:])
    for i in range(out.shape[0]):
        out[i] *= sign


@njit(cache=True)
def _err_scale(mode, d, y, yn, rtol, atol, sc):
    n = y.shape[0]
    for i in range(n):
        sc[i] = atol + rtol * max(abs(y[i]), abs(yn[i]))
    if mode == 2 or mode == 3:
        start = 0 if mode == 2 else d
        big = 0.0
        for i in range(start, n):
            big = max(big, abs(y[i]), abs(yn[i]))
        for i in range(start, n):
            sc[i] = rtol * (max(abs(y[i]), abs(yn[i])) + big) + 1e-300


@njit(cache=True)
def _escaped(mode, d, t, y, escape, ref_t, ref_h, ref_y, ref_q, w3):
    if not np.isfinite(escape):
        for i in range(y.shape[0]):
            if not np.isfinite(y[i]):
                return True
        return False
    s = 0.0
    if mode == 0 or mode == 1:
        for i in range(d):
            s += y[i] * y[i]
    elif mode == 2:
        dense_eval(t, ref_t, ref_h, ref_y, ref_q, w3)
        for i in range(d):
            v = w3[i] + y[i]
            s += v * v
    else:
        s1 = 0.0
        for i in range(d):
            v = y[i] + y[d + i]
            s += v * v
            s1 += y[i] * y[i]
        s = max(s, s1)
    return not (s <= escape * escape)


@njit(cache=True)
def integrate(mode, y0, s_out, sign, t0, A, B, f, ref_t, ref_h, ref_y, ref_q,
              rtol, atol, h_floor, escape, max_steps, record):
    """Integrate and sample at pseudo-times ``s_out`` (nondecreasing, >= 0).

    Returns
    -------
    out : ndarray (len(s_out), n)
    status : int
    s_fail : float
        Pseudo-time reached when a failure status is returned.
    rec_t, rec_h, rec_y, rec_q, nrec :
        Dense-output table in physical time when ``record`` is true
        (only meaningful for ``sign = +1``).
    """
    n = y0.shape[0]
    d = A.shape[0]
    nout = s_out.shape[0]
    out = np.empty((nout, n))
    cap = 64 if record else 1
    rec_t = np.empty(cap)
    rec_h = np.empty(cap)
    rec_y = np.empty((cap, n))
    rec_q = np.empty((cap, n, 4))
    nrec = 0

    w1 = np.empty(d)
    w2 = np.empty(d)
    w3 = np.empty(d)
    wj = np.empty((d, d))
    K = np.empty((7, n))
    y = y0.copy()
    yn = np.empty(n)
    ytmp = np.empty(n)
    sc = np.empty(n)
    err = np.empty(n)

    io = 0
    while io < nout and s_out[io] <= 0.0:
        for i in range(n):
            out[io, i] = y[i]
        io += 1
    if io == nout:
        return out, STATUS_OK, 0.0, rec_t[:0], rec_h[:0], rec_y[:0], rec_q[:0], 0
    s_end = s_out[nout - 1]

    s = 0.0
    _rhs(mode, t0, y, A, B, f, sign, ref_t, ref_h, ref_y, ref_q, w1, w2, w3, wj, K[0])

    # initial step (Hairer, Norsett, Wanner, II.4)
    for i in range(n):
        sc[i] = atol + rtol * abs(y[i])
    _err_scale(mode, d, y, y, rtol, atol, sc)
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        d0 = max(d0, abs(y[i]) / sc[i])
        d1 = max(d1, abs(K[0, i]) / sc[i])
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, s_end)
    for i in range(n):
        ytmp[i] = y[i] + h0 * K[0, i]
    _rhs(mode, t0 + sign * h0, ytmp, A, B, f, sign, ref_t, ref_h, ref_y, ref_q,
         w1, w2, w3, wj, K[1])
    d2 = 0.0
    for i in range(n):
        d2 = max(d2, abs(K[1, i] - K[0, i]) / sc[i])
    d2 /= h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h = min(100.0 * h0, h1, s_end)

    steps = 0
    while s < s_end:
        if steps >= max_steps:
            return out, STATUS_MAXSTEPS, s, rec_t[:nrec], rec_h[:nrec], rec_y[:nrec], rec_q[:nrec], nrec
        last = False
        if s + h >= s_end:
            h = s_end - s
            last = True
        if h < h_floor and not last:
            return out, STATUS_UNDERFLOW, s, rec_t[:nrec], rec_h[:nrec], rec_y[:nrec], rec_q[:nrec], nrec
        t = t0 + sign * s
        for i in range(n):
            ytmp[i] = y[i] + h * _A21 * K[0, i]
        _rhs(mode, t + sign * _C2 * h, ytmp, A, B, f, sign, ref_t, ref_h, ref_y, ref_q,
             w1, w2, w3, wj, K[1])
        for i in range(n):
            ytmp[i] = y[i] + h * (_A31 * K[0, i] + _A32 * K[1, i])
        _rhs(mode, t + sign * _C3 * h, ytmp, A, B, f, sign, ref_t, ref_h, ref_y, ref_q,
             w1, w2, w3, wj, K[2])
        for i in range(n):
            ytmp[i] = y[i] + h * (_A41 * K[0, i] + _A42 * K[1, i] + _A43 * K[2, i])
        _rhs(mode, t + sign * _C4 * h, ytmp, A, B, f, sign, ref_t, ref_h, ref_y, ref_q,
             w1, w2, w3, wj, K[3])
        for i in range(n):
            ytmp[i] = y[i] + h * (_A51 * K[0, i] + _A52 * K[1, i] + _A53 * K[2, i]
                                  + _A54 * K[3, i])
        _rhs(mode, t + sign * _C5 * h, ytmp, A, B, f, sign, ref_t, ref_h, ref_y, ref_q,
             w1, w2, w3, wj, K[4])
        for i in range(n):
            ytmp[i] = y[i] + h * (_A61 * K[0, i] + _A62 * K[1, i] + _A63 * K[2, i]
                                  + _A64 * K[3, i] + _A65 * K[4, i])
        _rhs(mode, t + sign * h, ytmp, A, B, f, sign, ref_t, ref_h, ref_y, ref_q,
             w1, w2, w3, wj, K[5])
        for i in range(n):
            yn[i] = y[i] + h * (_B1 * K[0, i] + _B3 * K[2, i] + _B4 * K[3, i]
                                + _B5 * K[4, i] + _B6 * K[5, i])
        s_new = s_end if last else s + h
        _rhs(mode, t0 + sign * s_new, yn, A, B, f, sign, ref_t, ref_h, ref_y, ref_q,
             w1, w2, w3, wj, K[6])
        steps += 1

        finite = True
        for i in range(n):
            err[i] = h * (_E1 * K[0, i] + _E3 * K[2, i] + _E4 * K[3, i]
                          + _E5 * K[4, i] + _E6 * K[5, i] + _E7 * K[6, i])
            if not np.isfinite(yn[i]) or not np.isfinite(err[i]):
                finite = False
        if not finite:
            if _escaped(mode, d, t, y, escape, ref_t, ref_h, ref_y, ref_q, w3):
                return out, STATUS_BLOWUP, s, rec_t[:nrec], rec_h[:nrec], rec_y[:nrec], rec_q[:nrec], nrec
            h *= 0.2
            continue
        _err_scale(mode, d, y, yn, rtol, atol, sc)
        en = 0.0
        for i in range(n):
            en = max(en, abs(err[i]) / sc[i])

        if en > 1.0:
            h *= max(0.2, 0.9 * en ** -0.2)
            if h < h_floor:
                return out, STATUS_UNDERFLOW, s, rec_t[:nrec], rec_h[:nrec], rec_y[:nrec], rec_q[:nrec], nrec
            continue

        # accepted: dense output Q = K^T P
        if record or (io < nout and s_out[io] < s_new):
            if record and nrec == cap:
                cap *= 2
                nt = np.empty(cap)
                nh = np.empty(cap)
                ny = np.empty((cap, n))
                nq = np.empty((cap, n, 4))
                nt[:nrec] = rec_t[:nrec]
                nh[:nrec] = rec_h[:nrec]
                ny[:nrec] = rec_y[:nrec]
                nq[:nrec] = rec_q[:nrec]
                rec_t, rec_h, rec_y, rec_q = nt, nh, ny, nq
            slot = nrec if record else 0
            for i in range(n):
                for m in range(4):
                    acc = 0.0
                    for j in range(7):
                        acc += K[j, i] * _P[j, m]
                    rec_q[slot, i, m] = acc
                rec_y[slot, i] = y[i]
            rec_t[slot] = t
            rec_h[slot] = h
            while io < nout and s_out[io] < s_new:
                th = (s_out[io] - s) / h
                p1 = th
                p2 = th * th
                p3 = p2 * th
                p4 = p3 * th
                for i in range(n):
                    out[io, i] = y[i] + h * (rec_q[slot, i, 0] * p1 + rec_q[slot, i, 1] * p2
                                             + rec_q[slot, i, 2] * p3 + rec_q[slot, i, 3] * p4)
                io += 1
            if record:
                nrec += 1
        s_prev = s
        s = s_new
        for i in range(n):
            y[i] = yn[i]
            K[0, i] = K[6, i]
        while io < nout and s_out[io] <= s:
            for i in range(n):
                out[io, i] = y[i]
            io += 1
        if _escaped(mode, d, t0 + sign * s, y, escape, ref_t, ref_h, ref_y, ref_q, w3):
            return out, STATUS_BLOWUP, s, rec_t[:nrec], rec_h[:nrec], rec_y[:nrec], rec_q[:nrec], nrec
        if s_prev == s:
            return out, STATUS_UNDERFLOW, s, rec_t[:nrec], rec_h[:nrec], rec_y[:nrec], rec_q[:nrec], nrec
        fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
        h *= fac
    return out, STATUS_OK, s, rec_t[:nrec], rec_h[:nrec], rec_y[:nrec], rec_q[:nrec], nrec


@njit(cache=True)
def emax_objective(v, A, B, f, H, times, Y, rtol, atol, h_floor, max_steps):
    """``max_i ‖H Ψ_{t_i}(v) − Y_i‖_2``; ``inf`` when integration fails."""
    d = A.shape[0]
    dummy_t = np.zeros(1)
    dummy_y = np.zeros((1, d))
    dummy_q = np.zeros((1, d, 4))
    out, status, _, _, _, _, _, _ = integrate(
        0, v, times, 1.0, 0.0, A, B, f, dummy_t, dummy_t, dummy_y, dummy_q,
        rtol, atol, h_floor, np.inf, max_steps, False)
    if status != STATUS_OK:
        return np.inf
    m = 0.0
    do = H.shape[0]
    for i in range(times.shape[0]):
        s = 0.0
        for r in range(do):
            acc = -Y[i, r]
            for c in range(d):
                acc += H[r, c] * out[i, c]
            s += acc * acc
        if s > m:
            m = s
    return np.sqrt(m)
