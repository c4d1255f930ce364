"""Sequential numeric kernels.

Everything here sticks to explicit loops over small dense arrays so that the
same source compiles under numba and runs unchanged as Python. Both paths
perform the same floating-point operations in the same order.
"""

import numpy as np

from ._backend import USE_NUMBA, jit

# attack kind codes
BIAS, STEALTHY, REPLAY, SPOOF, HOLD = 0, 1, 2, 3, 4

# kernel status codes
OK, SINGULAR = 0, 1


@jit
def affine(a, x, b, u, v, out):
    """out = a @ x + b @ u + v"""
    n = a.shape[0]
    for i in range(n):
        acc = 0.0
        for j in range(a.shape[1]):
            acc += a[i, j] * x[j]
        for j in range(b.shape[1]):
            acc += b[i, j] * u[j]
        out[i] = acc + v[i]


@jit
def invert(s, out):
    """Gauss-Jordan inverse with partial pivoting; returns False if singular."""
    p = s.shape[0]
    w = np.zeros((p, 2 * p))
    scale = 0.0
    for i in range(p):
        for j in range(p):
            w[i, j] = s[i, j]
            if abs(s[i, j]) > scale:
                scale = abs(s[i, j])
        w[i, p + i] = 1.0
    tol = 1e-14 * scale
    for col in range(p):
        piv = col
        for r in range(col + 1, p):
            if abs(w[r, col]) > abs(w[piv, col]):
                piv = r
        if not abs(w[piv, col]) > tol:
            return False
        if piv != col:
            for j in range(2 * p):
                tmp = w[col, j]
                w[col, j] = w[piv, j]
                w[piv, j] = tmp
        d = w[col, col]
        for j in range(2 * p):
            w[col, j] /= d
        for r in range(p):
            if r != col:
                f = w[r, col]
                if f != 0.0:
                    for j in range(2 * p):
                        w[r, j] -= f * w[col, j]
    for i in range(p):
        for j in range(p):
            out[i, j] = w[i, p + j]
    return True


@jit
def kf_predict(a, b, q, x, pcov, u, x_out, p_out):
    """x_out = A x + B u;  p_out = A P A^T + Q"""
    n = a.shape[0]
    zero = np.zeros(n)
    affine(a, x, b, u, zero, x_out)
    ap = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += a[i, k] * pcov[k, j]
            ap[i, j] = acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += ap[i, k] * a[j, k]
            p_out[i, j] = acc + q[i, j]


@jit
def kf_update(c, r, xm, pm, y, x_out, p_out, yhat_out, res_out):
    """Measurement update from the prior (xm, pm).

    Writes the prior output estimate ``C xm`` and the innovation ``y - C xm``.
    An all-zero innovation covariance (exactly known state, noiseless sensor)
    gives zero gain; any other singular covariance returns SINGULAR.
    """
    n = c.shape[1]
    p = c.shape[0]
    zero_u = np.zeros(0)
    empty = np.zeros((p, 0))
    zero_p = np.zeros(p)
    affine(c, xm, empty, zero_u, zero_p, yhat_out)
    for i in range(p):
        res_out[i] = y[i] - yhat_out[i]
    # pct = P C^T (n x p), s = C P C^T + R (p x p)
    pct = np.zeros((n, p))
    for i in range(n):
        for j in range(p):
            acc = 0.0
            for k in range(n):
                acc += pm[i, k] * c[j, k]
            pct[i, j] = acc
    s = np.zeros((p, p))
    all_zero = True
    for i in range(p):
        for j in range(p):
            acc = 0.0
            for k in range(n):
                acc += c[i, k] * pct[k, j]
            s[i, j] = acc + r[i, j]
            if s[i, j] != 0.0:
                all_zero = False
    if all_zero:
        for i in range(n):
            x_out[i] = xm[i]
            for j in range(n):
                p_out[i, j] = pm[i, j]
        return OK
    sinv = np.zeros((p, p))
    if not invert(s, sinv):
        return SINGULAR
    gain = np.zeros((n, p))
    for i in range(n):
        for j in range(p):
            acc = 0.0
            for k in range(p):
                acc += pct[i, k] * sinv[k, j]
            gain[i, j] = acc
    for i in range(n):
        acc = 0.0
        for j in range(p):
            acc += gain[i, j] * res_out[j]
        x_out[i] = xm[i] + acc
    # P = (I - K C) P^-, then symmetrised
    ikc = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(p):
                acc += gain[i, k] * c[k, j]
            ikc[i, j] = (1.0 if i == j else 0.0) - acc
    tmp = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += ikc[i, k] * pm[k, j]
            tmp[i, j] = acc
    for i in range(n):
        for j in range(n):
            p_out[i, j] = 0.5 * (tmp[i, j] + tmp[j, i])
    return OK


@jit
def stealthy_value(yhat, tau, direction):
    """ŷ + direction*tau, nudged toward ŷ until |value - ŷ| <= tau in floats."""
    ya = yhat + direction * tau
    while abs(ya - yhat) > tau:
        ya = np.nextafter(ya, yhat)
    return ya


@jit
def attack_value(kind, y, yhat, p1, p2, hold, replay, spoof):
    if kind == BIAS:
        return y + p1
    if kind == STEALTHY:
        return stealthy_value(yhat, p1, p2)
    if kind == REPLAY:
        return replay
    if kind == SPOOF:
        return p1 + spoof
    return hold


@jit
def plc_command(level, low, high, prev_valve, prev_pump):
    """Hysteresis law; a non-finite reading drains (valve closed, pump on)."""
    if not np.isfinite(level) or level >= high:
        return 0.0, 1.0
    if level <= low:
        return 1.0, 0.0
    return prev_valve, prev_pump


@jit
def simulate(a, b, c, q, r, x0, eta, v, low, high, lo_bound, hi_bound,
             kinds, targets, starts, ends, p1s, p2s, own_est, src_start,
             src_off, src_buf, spoof, xhat0, p0):
    """Closed-loop tank run. See :func:`physguard.sim.run_simulation`.

    Returns (x, u, y, ya, active, saturated, nonfinite, status, fail_step).
    """
    horizon = eta.shape[0]
    n = a.shape[0]
    p = c.shape[0]
    m = b.shape[1]
    n_atk = kinds.shape[0]
    xs = np.zeros((horizon, n))
    us = np.zeros((horizon, m))
    ys = np.zeros((horizon, p))
    yas = np.zeros((horizon, p))
    active = np.zeros(horizon, dtype=np.bool_)
    saturated = np.zeros(horizon, dtype=np.bool_)
    nonfinite = np.zeros(horizon, dtype=np.bool_)

    need_def = False
    need_own = False
    for i in range(n_atk):
        if kinds[i] == STEALTHY:
            if own_est[i]:
                need_own = True
            else:
                need_def = True

    x = x0.copy()
    xd = xhat0.copy()
    pd = p0.copy()
    xo = xhat0.copy()
    po = p0.copy()
    xpost = np.zeros(n)
    ppost = np.zeros((n, n))
    yhd = np.zeros(p)
    yho = np.zeros(p)
    res = np.zeros(p)
    empty = np.zeros((p, 0))
    zero_u = np.zeros(0)
    valve = 0.0
    pump = 0.0
    u = np.zeros(m)
    xn = np.zeros(n)

    for k in range(horizon):
        y = np.zeros(p)
        affine(c, x, empty, zero_u, eta[k], y)
        ya = y.copy()
        if need_def:
            affine(c, xd, empty, zero_u, np.zeros(p), yhd)
        if need_own:
            affine(c, xo, empty, zero_u, np.zeros(p), yho)
        for i in range(n_atk):
            if starts[i] <= k < ends[i]:
                t = targets[i]
                j = k - starts[i]
                hold = 0.0
                rep = 0.0
                if kinds[i] == HOLD:
                    hold = ys[starts[i] - 1, t] if starts[i] > 0 else y[t]
                elif kinds[i] == REPLAY:
                    if src_start[i] >= 0:
                        rep = ys[src_start[i] + j, t]
                    else:
                        rep = src_buf[src_off[i] + j]
                yh = yho[t] if own_est[i] else yhd[t]
                ya[t] = attack_value(kinds[i], ya[t], yh, p1s[i], p2s[i],
                                     hold, rep, spoof[i, j])
                active[k] = True
        if need_def:
            st = kf_update(c, r, xd, pd, ya, xpost, ppost, yhd, res)
            if st != OK:
                return xs, us, ys, yas, active, saturated, nonfinite, st, k
            xd[:] = xpost
            pd[:, :] = ppost
        if need_own:
            st = kf_update(c, r, xo, po, y, xpost, ppost, yho, res)
            if st != OK:
                return xs, us, ys, yas, active, saturated, nonfinite, st, k
            xo[:] = xpost
            po[:, :] = ppost

        level = ya[0]
        nonfinite[k] = not np.isfinite(level)
        valve, pump = plc_command(level, low, high, valve, pump)
        u[0] = valve
        u[1] = pump

        xs[k] = x
        us[k] = u
        ys[k] = y
        yas[k] = ya

        affine(a, x, b, u, v[k], xn)
        if k + 1 < horizon:
            if xn[0] > hi_bound:
                xn[0] = hi_bound
                saturated[k + 1] = True
            elif xn[0] < lo_bound:
                xn[0] = lo_bound
                saturated[k + 1] = True
        x[:] = xn
        if need_def:
            kf_predict(a, b, q, xd, pd, u, xpost, ppost)
            xd[:] = xpost
            pd[:, :] = ppost
        if need_own:
            kf_predict(a, b, q, xo, po, u, xpost, ppost)
            xo[:] = xpost
            po[:, :] = ppost
    return xs, us, ys, yas, active, saturated, nonfinite, OK, -1


@jit
def kalman_filter(a, b, c, q, r, xhat0, p0, us, ys):
    """Run the innovation-form filter over a recorded series.

    Step 0 uses (xhat0, p0) as the prior; step k > 0 predicts from the
    posterior of step k-1 with command ``us[k-1]``.
    Returns (yhat, residual, x_post, status, fail_step).
    """
    horizon = ys.shape[0]
    n = a.shape[0]
    p = c.shape[0]
    yhat = np.zeros((horizon, p))
    res = np.zeros((horizon, p))
    xpost_all = np.zeros((horizon, n))
    xm = xhat0.copy()
    pm = p0.copy()
    xpost = np.zeros(n)
    ppost = np.zeros((n, n))
    yh = np.zeros(p)
    rr = np.zeros(p)
    for k in range(horizon):
        if k > 0:
            kf_predict(a, b, q, xpost, ppost, us[k - 1], xm, pm)
        st = kf_update(c, r, xm, pm, ys[k], xpost, ppost, yh, rr)
        if st != OK:
            return yhat, res, xpost_all, st, k
        yhat[k] = yh
        res[k] = rr
        xpost_all[k] = xpost
    return yhat, res, xpost_all, OK, -1


@jit
def cusum_update(s_plus, s_minus, r, bias, threshold):
    """One two-sided CUSUM step with reset on alarm.

    Returns (s_plus', s_minus', statistic, alarm, nonfinite).
    """
    if not np.isfinite(r):
        return 0.0, 0.0, np.inf, True, True
    sp = max(0.0, s_plus + r - bias)
    sm = max(0.0, s_minus - r - bias)
    stat = max(sp, sm)
    if stat > threshold:
        return 0.0, 0.0, stat, True, False
    return sp, sm, stat, False, False


@jit
def cusum_series(res, bias, threshold):
    n = res.shape[0]
    stat = np.zeros(n)
    alarm = np.zeros(n, dtype=np.bool_)
    sp = 0.0
    sm = 0.0
    for k in range(n):
        sp, sm, st, al, _ = cusum_update(sp, sm, res[k], bias, threshold)
        stat[k] = st
        alarm[k] = al
    return stat, alarm


if USE_NUMBA:
    @jit
    def bad_data_series(res, tau):
        n = res.shape[0]
        stat = np.empty(n)
        alarm = np.zeros(n, dtype=np.bool_)
        for k in range(n):
            v = abs(res[k])
            if not np.isfinite(v):
                v = np.inf
            stat[k] = v
            alarm[k] = v > tau
        return stat, alarm
else:
    def bad_data_series(res, tau):
        stat = np.abs(res)
        stat[~np.isfinite(stat)] = np.inf
        return stat, stat > tau
