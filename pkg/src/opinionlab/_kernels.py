"""Compiled inner loops for long trajectory runs."""

import numpy as np
from numba import njit

RUNNING, CONVERGED, BLOWUP, DRIFT = 0, 1, 2, 3

# A step is "pure drift" when successive increments agree to this relative
# precision (plus a rounding allowance proportional to |y|) and are common to
# all players: the DeGroot + persistent-error regime, where y grows linearly.
DRIFT_REL = 1e-9
DRIFT_SPREAD = 1e-6
EPS64 = 2.220446049250313e-16


@njit(cache=True)
def _check(y, yp, dprev, tol, blowup, conv_count, need, detect_drift, drift_min):
    n = y.shape[0]
    step = 0.0
    ymax = 0.0
    d2 = 0.0
    dmax = -np.inf
    dmin = np.inf
    for i in range(n):
        d = y[i] - yp[i]
        a = abs(d)
        if a > step:
            step = a
        if abs(y[i]) > ymax:
            ymax = abs(y[i])
        e = abs(d - dprev[i])
        if e > d2:
            d2 = e
        if d > dmax:
            dmax = d
        if d < dmin:
            dmin = d
        dprev[i] = d
    if not (ymax <= blowup):
        return BLOWUP, conv_count
    if step < tol:
        conv_count += 1
        if conv_count >= need:
            return CONVERGED, conv_count
    else:
        conv_count = 0
    if detect_drift and step > drift_min:
        if d2 <= DRIFT_REL * step + 64.0 * EPS64 * ymax and (dmax - dmin) <= DRIFT_SPREAD * step:
            return DRIFT, conv_count
    return RUNNING, conv_count


@njit(cache=True)
def run_synchronous(y, A, m, g, x, xi, nu, t0, steps, tol, blowup, conv_count, need,
                    detect_drift, drift_min, dprev, rec, rec_every, rec_pos):
    """Advance ``y`` in place by up to ``steps`` periods.

    ``nu`` is either empty (no idiosyncratic noise) or has ``steps`` rows.
    Returns (status, last period, consecutive sub-tol count, next record row).
    """
    n = y.shape[0]
    yp = np.empty(n)
    use_nu = nu.shape[0] > 0
    t = t0
    for s in range(steps):
        t += 1
        for i in range(n):
            yp[i] = y[i]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += A[i, j] * yp[j]
            z = acc + xi[i]
            if use_nu:
                z += nu[s, i]
            y[i] = (1.0 - g[i]) * yp[i] + g[i] * (m[i] * x[i] + (1.0 - m[i]) * z)
        if rec_every > 0 and t % rec_every == 0 and rec_pos < rec.shape[0]:
            rec[rec_pos, 0] = t
            for i in range(n):
                rec[rec_pos, i + 1] = y[i]
            rec_pos += 1
        status, conv_count = _check(y, yp, dprev, tol, blowup, conv_count, need,
                                    detect_drift, drift_min)
        if status != RUNNING:
            return status, t, conv_count, rec_pos
    return RUNNING, t, conv_count, rec_pos


@njit(cache=True)
def run_scheduled(y, Z, A, m, g, x, xi, nu, hear, update, t0, steps, tol, blowup,
                  conv_count, need, detect_drift, drift_min, dprev, rec, rec_every, rec_pos):
    """Scheduled protocol: perceptions Z[i, j] refresh only when i hears j.

    ``hear`` has shape (P, n, n) and ``update`` (P, n); period t uses row
    ``t % P``.  Players not updating keep their opinion.
    """
    n = y.shape[0]
    P = hear.shape[0]
    yp = np.empty(n)
    use_nu = nu.shape[0] > 0
    t = t0
    for s in range(steps):
        t += 1
        r = t % P
        for i in range(n):
            yp[i] = y[i]
        for i in range(n):
            for j in range(n):
                if hear[r, i, j]:
                    Z[i, j] = yp[j] + xi[i]
        for i in range(n):
            if not update[r, i]:
                continue
            z = 0.0
            for j in range(n):
                if A[i, j] != 0.0:
                    z += A[i, j] * Z[i, j]
            if use_nu:
                z += nu[s, i]
            y[i] = (1.0 - g[i]) * yp[i] + g[i] * (m[i] * x[i] + (1.0 - m[i]) * z)
        if rec_every > 0 and t % rec_every == 0 and rec_pos < rec.shape[0]:
            rec[rec_pos, 0] = t
            for i in range(n):
                rec[rec_pos, i + 1] = y[i]
            rec_pos += 1
        status, conv_count = _check(y, yp, dprev, tol, blowup, conv_count, need,
                                    detect_drift, drift_min)
        if status != RUNNING:
            return status, t, conv_count, rec_pos
    return RUNNING, t, conv_count, rec_pos
