"""Adaptive Dormand-Prince 5(4) kernel for the coupled biorthogonal system.

The right state follows -i H psi_r and the left state -i H^H psi_l, with the
mean-field feedback w computed from stored (rescaled) amplitudes; the joint
rescale keeps logscale_r + logscale_l = 0, so stored bilinears equal raw ones
and the feedback never overflows even when the raw norm grows exponentially.

State layout (8 reals):
    y = [Re a1, Im a1, Re b1, Im b1, Re a2, Im a2, Re b2, Im b2]

This is the single production integrator: trajectories and parameter sweeps
both run through it. Tableau and dense-output coefficients are the standard
Dormand-Prince 5(4) pair with the quartic interpolant.
"""

import numpy as np
from numba import njit, prange

# nodes
_C = np.array([0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0])

# stage coefficients
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                          64448.0 / 6561.0, -212.0 / 729.0)
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0,
                                46732.0 / 5247.0, 49.0 / 176.0,
                                -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
# embedded error weights (5th minus 4th order), including the FSAL stage
_E = np.array([71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
               -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0])

# dense-output interpolant: y(t0 + q*h) = y0 + h * sum_s K[s] * poly_s(q)
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
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0,
     69997945.0 / 29380423.0],
])

# status codes
OK = 0
STEP_UNDERFLOW = 1
NON_FINITE = 2
SINGULAR_STOP = 3

# out_scalars slots
S_T_END = 0
S_LS_R = 1
S_LS_L = 2
S_NSTEPS = 3
S_NREJECTED = 4
S_NRESCALE = 5
S_SINGULAR_T = 6
S_MIN_Z = 7
S_NORM_DRIFT = 8
_NSCALARS = 9


@njit(cache=True)
def _rhs(t, y, d1, d2, c, amp, omega, eps0, out):
    a1r, a1i, b1r, b1i = y[0], y[1], y[2], y[3]
    a2r, a2i, b2r, b2i = y[4], y[5], y[6], y[7]
    g = amp * np.sin(omega * t) + eps0
    # w = b1*conj(b2) - a1*conj(a2) from stored amplitudes
    wr = (b1r * b2r + b1i * b2i) - (a1r * a2r + a1i * a2i)
    wi = (b1i * b2r - b1r * b2i) - (a1i * a2r - a1r * a2i)
    fr = 0.5 * (g + c * wr)
    fi = 0.5 * c * wi
    h1 = 0.5 * d1
    h2 = 0.5 * d2
    # right state: d/dt (a1, b1) = -i [[F, h1], [h2, -F]] (a1, b1)
    t1r = fr * a1r - fi * a1i + h1 * b1r
    t1i = fr * a1i + fi * a1r + h1 * b1i
    out[0] = t1i
    out[1] = -t1r
    t2r = h2 * a1r - (fr * b1r - fi * b1i)
    t2i = h2 * a1i - (fr * b1i + fi * b1r)
    out[2] = t2i
    out[3] = -t2r
    # left state: d/dt (a2, b2) = -i [[conj(F), h2], [h1, -conj(F)]] (a2, b2)
    t3r = fr * a2r + fi * a2i + h2 * b2r
    t3i = fr * a2i - fi * a2r + h2 * b2i
    out[4] = t3i
    out[5] = -t3r
    t4r = h1 * a2r - (fr * b2r + fi * b2i)
    t4i = h1 * a2i - (fr * b2i - fi * b2r)
    out[6] = t4i
    out[7] = -t4r


@njit(cache=True)
def _error_norm(err, y0, y1, atol, rtol):
    acc = 0.0
    for i in range(8):
        big = abs(y0[i])
        if abs(y1[i]) > big:
            big = abs(y1[i])
        sc = atol + rtol * big
        r = err[i] / sc
        acc += r * r
    return np.sqrt(acc / 8.0)


@njit(cache=True)
def _initial_step(t0, y0, f0, span, atol, rtol, d1, d2, c, amp, omega, eps0):
    d0 = 0.0
    d1n = 0.0
    for i in range(8):
        sc = atol + rtol * abs(y0[i])
        d0 += (y0[i] / sc) ** 2
        d1n += (f0[i] / sc) ** 2
    d0 = np.sqrt(d0 / 8.0)
    d1n = np.sqrt(d1n / 8.0)
    if d0 < 1e-5 or d1n < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1n
    if h0 > span:
        h0 = span
    y1 = np.empty(8)
    f1 = np.empty(8)
    for i in range(8):
        y1[i] = y0[i] + h0 * f0[i]
    _rhs(t0 + h0, y1, d1, d2, c, amp, omega, eps0, f1)
    d2n = 0.0
    for i in range(8):
        sc = atol + rtol * abs(y0[i])
        d2n += ((f1[i] - f0[i]) / sc) ** 2
    d2n = np.sqrt(d2n / 8.0) / h0
    dm = max(d1n, d2n)
    if dm <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / dm) ** 0.2
    h = min(100.0 * h0, h1)
    if h > span:
        h = span
    return h


@njit(cache=True)
def integrate_kernel(y, ls, t0, t1,
                     d1, d2, c, amp, omega, eps0,
                     rtol, atol, max_step, rescale_threshold, singular_cap,
                     stop_at_singular,
                     sample_ts, out_samples,
                     obs_start, obs_dt,
                     out_scalars):
    """Advance the biorthogonal pair from t0 to t1 in place.

    y: state (8,), modified in place. ls: logscales (2,), in place.
    sample_ts: sorted times in [t0, t1] to fill into out_samples (n, 10)
    as 8 state components plus both logscales (dense interpolation).
    obs_dt > 0 turns on uniform observation of z = (|b1|^2-|a1|^2)/norm^2
    from obs_start on, tracked as a running minimum (for trapping metrics).
    Returns a status code; counters and results land in out_scalars.
    """
    span = t1 - t0
    log_cap = np.log(singular_cap)

    K = np.empty((7, 8))
    y_new = np.empty(8)
    y_err = np.empty(8)
    y_tmp = np.empty(8)

    t = t0
    nsteps = 0
    nrejected = 0
    nrescale = 0
    singular_t = np.nan
    min_z = np.inf
    norm_drift = 0.0

    si = 0
    n_samples = len(sample_ts)
    while si < n_samples and sample_ts[si] <= t0:
        for i in range(8):
            out_samples[si, i] = y[i]
        out_samples[si, 8] = ls[0]
        out_samples[si, 9] = ls[1]
        si += 1

    next_obs = obs_start
    if obs_dt > 0.0 and next_obs <= t0:
        a2n = y[0] * y[0] + y[1] * y[1]
        b2n = y[2] * y[2] + y[3] * y[3]
        z = (b2n - a2n) / (a2n + b2n)
        if z < min_z:
            min_z = z
        next_obs = obs_start + obs_dt

    if span <= 0.0:
        out_scalars[S_T_END] = t
        out_scalars[S_LS_R] = ls[0]
        out_scalars[S_LS_L] = ls[1]
        out_scalars[S_NSTEPS] = 0
        out_scalars[S_NREJECTED] = 0
        out_scalars[S_NRESCALE] = 0
        out_scalars[S_SINGULAR_T] = singular_t
        out_scalars[S_MIN_Z] = min_z
        out_scalars[S_NORM_DRIFT] = norm_drift
        return OK

    _rhs(t, y, d1, d2, c, amp, omega, eps0, K[0])
    h = _initial_step(t, y, K[0], span, atol, rtol, d1, d2, c, amp, omega, eps0)
    if h > max_step:
        h = max_step

    fsal = True
    while t < t1:
        last = False
        if t + h >= t1:
            h = t1 - t
            last = True
        elif h < 1e-14 * span:
            out_scalars[S_T_END] = t
            out_scalars[S_LS_R] = ls[0]
            out_scalars[S_LS_L] = ls[1]
            out_scalars[S_NSTEPS] = nsteps
            out_scalars[S_NREJECTED] = nrejected
            out_scalars[S_NRESCALE] = nrescale
            out_scalars[S_SINGULAR_T] = singular_t
            out_scalars[S_MIN_Z] = min_z
            out_scalars[S_NORM_DRIFT] = norm_drift
            return STEP_UNDERFLOW

        if not fsal:
            _rhs(t, y, d1, d2, c, amp, omega, eps0, K[0])
            fsal = True

        # stages 2..6
        for i in range(8):
            y_tmp[i] = y[i] + h * _A21 * K[0, i]
        _rhs(t + _C[1] * h, y_tmp, d1, d2, c, amp, omega, eps0, K[1])
        for i in range(8):
            y_tmp[i] = y[i] + h * (_A31 * K[0, i] + _A32 * K[1, i])
        _rhs(t + _C[2] * h, y_tmp, d1, d2, c, amp, omega, eps0, K[2])
        for i in range(8):
            y_tmp[i] = y[i] + h * (_A41 * K[0, i] + _A42 * K[1, i] + _A43 * K[2, i])
        _rhs(t + _C[3] * h, y_tmp, d1, d2, c, amp, omega, eps0, K[3])
        for i in range(8):
            y_tmp[i] = y[i] + h * (_A51 * K[0, i] + _A52 * K[1, i]
                                   + _A53 * K[2, i] + _A54 * K[3, i])
        _rhs(t + _C[4] * h, y_tmp, d1, d2, c, amp, omega, eps0, K[4])
        for i in range(8):
            y_tmp[i] = y[i] + h * (_A61 * K[0, i] + _A62 * K[1, i] + _A63 * K[2, i]
                                   + _A64 * K[3, i] + _A65 * K[4, i])
        _rhs(t + h, y_tmp, d1, d2, c, amp, omega, eps0, K[5])

        # 5th order solution, then FSAL stage at (t+h, y_new)
        for i in range(8):
            y_new[i] = y[i] + h * (_B1 * K[0, i] + _B3 * K[2, i] + _B4 * K[3, i]
                                   + _B5 * K[4, i] + _B6 * K[5, i])
        _rhs(t + h, y_new, d1, d2, c, amp, omega, eps0, K[6])

        for i in range(8):
            e = 0.0
            for s in range(7):
                e += _E[s] * K[s, i]
            y_err[i] = h * e

        err = _error_norm(y_err, y, y_new, atol, rtol)
        if not np.isfinite(err):
            out_scalars[S_T_END] = t
            out_scalars[S_LS_R] = ls[0]
            out_scalars[S_LS_L] = ls[1]
            out_scalars[S_NSTEPS] = nsteps
            out_scalars[S_NREJECTED] = nrejected
            out_scalars[S_NRESCALE] = nrescale
            out_scalars[S_SINGULAR_T] = singular_t
            out_scalars[S_MIN_Z] = min_z
            out_scalars[S_NORM_DRIFT] = norm_drift
            return NON_FINITE

        if err > 1.0:
            nrejected += 1
            fac = 0.9 * err ** -0.2
            if fac < 0.2:
                fac = 0.2
            h *= fac
            continue

        # accepted: dense interpolation for samples and z observations
        t_new = t1 if last else t + h
        while si < n_samples and sample_ts[si] <= t_new:
            q = (sample_ts[si] - t) / h
            for i in range(8):
                acc = 0.0
                for s in range(7):
                    poly = q * (_P[s, 0] + q * (_P[s, 1] + q * (_P[s, 2] + q * _P[s, 3])))
                    acc += K[s, i] * poly
                out_samples[si, i] = y[i] + h * acc
            out_samples[si, 8] = ls[0]
            out_samples[si, 9] = ls[1]
            si += 1
        if obs_dt > 0.0:
            while next_obs <= t_new and next_obs <= t1:
                q = (next_obs - t) / h
                a1r = 0.0
                a1i = 0.0
                b1r = 0.0
                b1i = 0.0
                for s in range(7):
                    poly = q * (_P[s, 0] + q * (_P[s, 1] + q * (_P[s, 2] + q * _P[s, 3])))
                    a1r += K[s, 0] * poly
                    a1i += K[s, 1] * poly
                    b1r += K[s, 2] * poly
                    b1i += K[s, 3] * poly
                a1r = y[0] + h * a1r
                a1i = y[1] + h * a1i
                b1r = y[2] + h * b1r
                b1i = y[3] + h * b1i
                a2n = a1r * a1r + a1i * a1i
                b2n = b1r * b1r + b1i * b1i
                z = (b2n - a2n) / (a2n + b2n)
                if z < min_z:
                    min_z = z
                next_obs += obs_dt

        for i in range(8):
            y[i] = y_new[i]
            K[0, i] = K[6, i]
        t = t_new
        nsteps += 1

        ok_fin = True
        for i in range(8):
            if not np.isfinite(y[i]):
                ok_fin = False
        if not ok_fin:
            out_scalars[S_T_END] = t
            out_scalars[S_LS_R] = ls[0]
            out_scalars[S_LS_L] = ls[1]
            out_scalars[S_NSTEPS] = nsteps
            out_scalars[S_NREJECTED] = nrejected
            out_scalars[S_NRESCALE] = nrescale
            out_scalars[S_SINGULAR_T] = singular_t
            out_scalars[S_MIN_Z] = min_z
            out_scalars[S_NORM_DRIFT] = norm_drift
            return NON_FINITE

        # biorthogonal norm drift (stored bilinear, raw by construction)
        nr = (y[0] * y[4] + y[1] * y[5]) + (y[2] * y[6] + y[3] * y[7])
        ni = (y[1] * y[4] - y[0] * y[5]) + (y[3] * y[6] - y[2] * y[7])
        drift = np.sqrt((nr - 1.0) ** 2 + ni * ni)
        if drift > norm_drift:
            norm_drift = drift

        # z at step ends as a safety net between observation samples
        if obs_dt > 0.0 and t >= obs_start:
            a2n = y[0] * y[0] + y[1] * y[1]
            b2n = y[2] * y[2] + y[3] * y[3]
            z = (b2n - a2n) / (a2n + b2n)
            if z < min_z:
                min_z = z

        # singular cap on the raw upper-level population
        if np.isnan(singular_t):
            lp = y[0] * y[0] + y[1] * y[1]
            if lp > 0.0 and 2.0 * ls[0] + np.log(lp) > log_cap:
                singular_t = t
                if stop_at_singular:
                    out_scalars[S_T_END] = t
                    out_scalars[S_LS_R] = ls[0]
                    out_scalars[S_LS_L] = ls[1]
                    out_scalars[S_NSTEPS] = nsteps
                    out_scalars[S_NREJECTED] = nrejected
                    out_scalars[S_NRESCALE] = nrescale
                    out_scalars[S_SINGULAR_T] = singular_t
                    out_scalars[S_MIN_Z] = min_z
                    out_scalars[S_NORM_DRIFT] = norm_drift
                    return SINGULAR_STOP

        # joint rescale, triggered by the right state only: the left stored
        # amplitudes may grow like the inverse overlap without harm, while
        # a decaying right state is rescaled back up via the low-norm branch
        big = 0.0
        for i in range(4):
            if abs(y[i]) > big:
                big = abs(y[i])
        s2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3]
        if big > rescale_threshold or s2 < 1.0 / (rescale_threshold * rescale_threshold):
            s = np.sqrt(s2)
            if s > 0.0 and np.isfinite(s):
                logs = np.log(s)
                for i in range(4):
                    y[i] /= s
                for i in range(4, 8):
                    y[i] *= s
                ls[0] += logs
                ls[1] -= logs
                nrescale += 1
                fsal = False

        fac = 0.9 * err ** -0.2 if err > 0.0 else 10.0
        if fac > 10.0:
            fac = 10.0
        if fac < 0.2:
            fac = 0.2
        h *= fac
        if h > max_step:
            h = max_step

    out_scalars[S_T_END] = t
    out_scalars[S_LS_R] = ls[0]
    out_scalars[S_LS_L] = ls[1]
    out_scalars[S_NSTEPS] = nsteps
    out_scalars[S_NREJECTED] = nrejected
    out_scalars[S_NRESCALE] = nrescale
    out_scalars[S_SINGULAR_T] = singular_t
    out_scalars[S_MIN_Z] = min_z
    out_scalars[S_NORM_DRIFT] = norm_drift
    return OK


# sweep observable codes
OBS_RAW_POP_A1 = 0
OBS_PROJ_POP_A = 1
OBS_MIN_Z = 2


@njit(parallel=True, cache=True)
def sweep_kernel(d1s, d2s, cs, amps, omegas, eps0s,
                 y0, horizons, windows, obs_dts,
                 rtol, atol, max_step_fracs, rescale_threshold, singular_cap,
                 observable, stop_at_singular):
    """Integrate one cell per parameter tuple; embarrassingly parallel.

    Every cell runs the same deterministic arithmetic regardless of the
    thread that executes it, so results are bit-identical for any worker
    count. Returns (values, status, singular_t, min_z).
    """
    n = len(d1s)
    values = np.empty(n)
    status = np.empty(n, dtype=np.int64)
    singular = np.empty(n)
    minz = np.empty(n)
    empty_ts = np.empty(0)
    for i in prange(n):
        y = np.empty(8)
        for j in range(8):
            y[j] = y0[j]
        ls = np.zeros(2)
        scal = np.empty(_NSCALARS)
        samples = np.empty((0, 10))
        code = integrate_kernel(
            y, ls, 0.0, horizons[i],
            d1s[i], d2s[i], cs[i], amps[i], omegas[i], eps0s[i],
            rtol, atol, max_step_fracs[i] * 2.0 * np.pi / omegas[i],
            rescale_threshold, singular_cap,
            stop_at_singular,
            empty_ts, samples,
            windows[i], obs_dts[i],
            scal)
        status[i] = code
        singular[i] = scal[S_SINGULAR_T]
        minz[i] = scal[S_MIN_Z]
        a2n = y[0] * y[0] + y[1] * y[1]
        b2n = y[2] * y[2] + y[3] * y[3]
        if observable == OBS_RAW_POP_A1:
            lp = 2.0 * ls[0] + np.log(a2n) if a2n > 0.0 else -np.inf
            if lp > 690.0:
                values[i] = np.inf
            else:
                values[i] = np.exp(lp)
        elif observable == OBS_PROJ_POP_A:
            values[i] = a2n / (a2n + b2n)
        else:
            values[i] = scal[S_MIN_Z]
    return values, status, singular, minz
