"""Trajectory simulation under synchronous and scheduled hearing protocols."""

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from ._validation import check_random_state
from .exceptions import InvalidSize, NonConvergence

DEFAULT_TOL = 1e-10
DEFAULT_MAX_T = 10**6
DEFAULT_BLOWUP = 1e9
CONSECUTIVE = 3
NU_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class Protocol:
    """Who hears whom, and who updates, in each period.

    ``hear`` is a boolean table of shape (P, n, n) and ``update`` one of shape
    (P, n); period t uses row ``t % P``.  The synchronous protocol is the
    special case P = 1 with every neighbour heard and every player updating.
    """

    kind: str
    hear: Optional[np.ndarray] = None
    update: Optional[np.ndarray] = None
    coverage_K: int = 1
    name: str = ""

    @classmethod
    def synchronous(cls):
        return cls("synchronous", name="synchronous")

    @classmethod
    def scheduled(cls, hear, update=None, coverage_K=None, name="scheduled"):
        hear = np.asarray(hear, dtype=bool)
        if hear.ndim != 3 or hear.shape[1] != hear.shape[2]:
            raise InvalidSize("hear table must have shape (P, n, n)")
        P, n, _ = hear.shape
        update = np.ones((P, n), bool) if update is None else np.asarray(update, bool)
        if update.shape != (P, n):
            raise InvalidSize("update table must have shape (P, n)")
        return cls("scheduled", hear, update, coverage_K or P, name)

    def check_coverage(self, net):
        """Every neighbour must be heard within every window of K periods."""
        if self.kind == "synchronous":
            return True
        P, n, _ = self.hear.shape
        if n != net.n:
            raise InvalidSize("protocol and network sizes differ")
        nbr = net.A > 0
        Kc = self.coverage_K
        for t in range(P):
            rows = [(t + s) % P for s in range(Kc)]
            seen = self.hear[rows].any(axis=0)
            if np.any(nbr & ~seen):
                return False
        return True


def alternating_protocol(n):
    """Players hear all neighbours only every other period, staggered by parity."""
    hear = np.zeros((2, n, n), bool)
    for i in range(n):
        hear[i % 2, i, :] = True
    np.einsum("kii->ki", hear)[:] = False
    return Protocol.scheduled(hear, coverage_K=2, name="alternating")


def every_kth_update_protocol(n, player, k):
    """``player`` hears and updates only in periods divisible by ``k``."""
    hear = np.ones((k, n, n), bool)
    for r in range(k):
        np.fill_diagonal(hear[r], False)
    update = np.ones((k, n), bool)
    hear[1:, player, :] = False
    update[1:, player] = False
    return Protocol.scheduled(hear, update, coverage_K=k, name=f"player{player}_every{k}")


def random_covering_protocol(net, K_cover, seed=None, extra=0.2):
    """Random schedule in which each edge is heard at least once every K periods.

    Each edge gets a random phase in 0..K-1 and is always heard at that phase;
    on other periods it is heard with probability ``extra``.
    """
    rng = check_random_state(seed)
    n = net.n
    nbr = net.A > 0
    phase = rng.integers(0, K_cover, size=(n, n))
    hear = np.zeros((K_cover, n, n), bool)
    for r in range(K_cover):
        hear[r] = nbr & ((phase == r) | (rng.random((n, n)) < extra))
    return Protocol.scheduled(hear, coverage_K=K_cover, name=f"random_K{K_cover}")


@dataclass(eq=False)
class Trajectory:
    """Recorded opinions and the final run status.

    ``ys`` holds y^0 plus every recorded period (rows aligned with ``times``);
    ``status`` is ``converged``, ``maxed_out`` or ``diverged``.
    """

    times: np.ndarray
    ys: np.ndarray
    status: str
    t_stop: int
    y_final: np.ndarray
    reason: str = ""

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def diverged(self):
        return self.status == "diverged"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.ys.shape[1]
        w.writerow(["t"] + [f"y_{i + 1}" for i in range(n)])
        for t, row in zip(self.times, self.ys):
            w.writerow([int(t)] + [f"{v:.12g}" for v in row])
        return buf.getvalue()


def step(y_prev, net, rules, realization, t=1, protocol=None, Z=None, nu=None):
    """One period of the update rule; returns the new opinion vector.

    For scheduled protocols the perception matrix ``Z`` is updated in place
    (pass ``None`` to start from the as-if-heard-at-zero perceptions).
    """
    A, m, g = net.A, rules.m, rules.gamma
    xi = realization.xi
    y_prev = np.asarray(y_prev, dtype=np.float64)
    nu = np.zeros(net.n) if nu is None else np.asarray(nu, dtype=np.float64)
    if protocol is None or protocol.kind == "synchronous":
        z = A @ y_prev + xi + nu
        return (1 - g) * y_prev + g * (m * realization.x + (1 - m) * z)
    if Z is None:
        Z = initial_perceptions(realization)
    r = t % protocol.hear.shape[0]
    heard = protocol.hear[r]
    Z[heard] = (y_prev[None, :] + xi[:, None])[heard]
    z = np.sum(A * Z, axis=1) + nu
    upd = protocol.update[r]
    y = y_prev.copy()
    y[upd] = ((1 - g) * y_prev + g * (m * realization.x + (1 - m) * z))[upd]
    return y


def initial_perceptions(realization):
    """Perceptions as if every neighbour was heard once at t = 0: x_j + xi_i."""
    return realization.x[None, :] + realization.xi[:, None]


def run(net, rules, realization, protocol=None, max_T=DEFAULT_MAX_T, tol=DEFAULT_TOL,
        blowup_threshold=DEFAULT_BLOWUP, record_every=0, detect_drift=True, y0=None):
    """Iterate the dynamics from y^0 = x until convergence, blow-up or max_T.

    ``converged``: sup-norm step change below ``tol`` for 3 consecutive periods.
    ``diverged``: some |y_i| exceeds ``blowup_threshold``, or (with
    ``detect_drift``) the increments have settled on a common nonzero drift,
    which means opinions grow linearly without bound.
    ``record_every`` > 0 stores every k-th period in the trajectory.
    """
    n = net.n
    if rules.n != n or realization.n != n:
        raise InvalidSize("network, rules and realization sizes differ")
    protocol = protocol or Protocol.synchronous()
    A = np.ascontiguousarray(net.A)
    m = np.ascontiguousarray(rules.m)
    g = np.ascontiguousarray(rules.gamma)
    x = np.ascontiguousarray(realization.x)
    xi = np.ascontiguousarray(realization.xi)
    y = np.array(realization.x if y0 is None else y0, dtype=np.float64)
    y_init = y.copy()
    sd = np.sqrt(realization.nu_variance)
    nu_rng = realization.nu_stream() if sd > 0 else None
    dprev = np.zeros(n)
    n_rec = max_T // record_every if record_every > 0 else 0
    rec = np.empty((n_rec, n + 1))
    rec_pos = 0
    t = 0
    conv = 0
    status = K.RUNNING
    drift_min = 1e3 * tol
    if protocol.kind == "scheduled":
        Z = np.ascontiguousarray(initial_perceptions(realization))
        hear = np.ascontiguousarray(protocol.hear)
        update = np.ascontiguousarray(protocol.update)
    empty = np.empty((0, n))
    while t < max_T and status == K.RUNNING:
        steps = min(NU_CHUNK, max_T - t)
        nu = nu_rng.standard_normal((steps, n)) * sd if nu_rng is not None else empty
        if protocol.kind == "synchronous":
            status, t, conv, rec_pos = K.run_synchronous(
                y, A, m, g, x, xi, nu, t, steps, tol, blowup_threshold, conv, CONSECUTIVE,
                detect_drift, drift_min, dprev, rec, record_every, rec_pos)
        else:
            status, t, conv, rec_pos = K.run_scheduled(
                y, Z, A, m, g, x, xi, nu, hear, update, t, steps, tol, blowup_threshold,
                conv, CONSECUTIVE, detect_drift, drift_min, dprev, rec, record_every, rec_pos)
    label = {K.RUNNING: "maxed_out", K.CONVERGED: "converged",
             K.BLOWUP: "diverged", K.DRIFT: "diverged"}[status]
    reason = {K.BLOWUP: "blowup", K.DRIFT: "linear drift"}.get(status, "")
    times = np.concatenate([[0], rec[:rec_pos, 0]]).astype(np.int64)
    ys = np.vstack([y_init, rec[:rec_pos, 1:]])
    if record_every > 0 and times[-1] != t:
        times = np.append(times, t)
        ys = np.vstack([ys, y])
    return Trajectory(times, ys, label, int(t), y.copy(), reason)


def protocol_invariance_check(net, rules, realization, protocols, max_T=DEFAULT_MAX_T,
                              tol=DEFAULT_TOL):
    """Run each protocol to convergence and compare the limits.

    Returns a dict with the limits, the max pairwise sup-norm gap and
    ``passed`` (gap < 10 tol).  Raises NonConvergence if any run stalls.
    """
    limits = []
    for p in protocols:
        tr = run(net, rules, realization, p, max_T=max_T, tol=tol, detect_drift=False)
        if not tr.converged:
            raise NonConvergence(f"protocol {p.name or p.kind} ended {tr.status} at t={tr.t_stop}")
        limits.append(tr.y_final)
    gap = 0.0
    for a in range(len(limits)):
        for b in range(a + 1, len(limits)):
            gap = max(gap, float(np.max(np.abs(limits[a] - limits[b]))))
    return {"names": [p.name or p.kind for p in protocols], "limits": limits,
            "max_gap": gap, "passed": gap < 10 * tol}


def iterate_batch(net, rules, x, xi, max_T=DEFAULT_MAX_T, tol=DEFAULT_TOL, nu_variance=0.0,
                  seed=None, blowup_threshold=DEFAULT_BLOWUP):
    """Vectorized synchronous dynamics for many realizations at once.

    ``x`` and ``xi`` have shape (R, n).  With idiosyncratic noise the run
    always lasts ``max_T`` periods.  Returns (Y, converged_mask, t_stop).
    """
    A, m, g = net.A, rules.m, rules.gamma
    Y = np.array(x, dtype=np.float64)
    anchor = m * x + (1 - m) * xi
    sd = np.sqrt(nu_variance)
    rng = check_random_state(seed)
    quiet = np.zeros(Y.shape[0], dtype=np.int64)
    t = 0
    while t < max_T:
        t += 1
        Z = Y @ A.T
        if sd > 0:
            Z += rng.standard_normal(Y.shape) * sd
        Yn = (1 - g) * Y + g * (anchor + (1 - m) * Z)
        step_size = np.max(np.abs(Yn - Y), axis=1)
        Y = Yn
        if sd == 0:
            quiet = np.where(step_size < tol, quiet + 1, 0)
            if np.all(quiet >= CONSECUTIVE):
                break
        if np.max(np.abs(Y)) > blowup_threshold:
            break
    return Y, quiet >= CONSECUTIVE, t
