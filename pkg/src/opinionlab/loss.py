"""Expected long-run losses E(y_i - theta)^2, analytic and Monte Carlo."""

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import check_vector
from .exceptions import AllDeGroot, UnsupportedNetwork
from .longrun import covariance_limit, dg_consensus, influence, solve_longrun
from .net import make_complete, make_directed_circle, make_star
from .rules import NoiseSpec, SignalModel, sample_batch
from .sim import iterate_batch


def efficient_weights(sigma_sq):
    """Inverse-variance weights pi* and the minimal aggregate variance v*."""
    s = np.atleast_1d(np.asarray(sigma_sq, dtype=np.float64))
    if np.any(s <= 0):
        raise ValueError("sigma_sq must be positive")
    prec = 1.0 / s
    return prec / prec.sum(), 1.0 / prec.sum()


def min_composite_variance(sigma_sq):
    """W_i* = min_q var(q . x_{-i}) for each i, i.e. 1 / sum_{k != i} 1/sigma_k^2."""
    prec = 1.0 / np.asarray(sigma_sq, dtype=np.float64)
    return 1.0 / (prec.sum() - prec)


@dataclass(eq=False)
class LossReport:
    """Per-player losses with efficiency benchmarks.

    ``W`` is nan for players whose decomposition is undefined (every other
    player DeGroot).  ``diverged`` marks DeGroot profiles with noise, for
    which no finite limit exists and ``L`` is nan.
    """

    L: np.ndarray
    W: np.ndarray
    v_star: float
    pi_star: np.ndarray
    delta_hat: np.ndarray
    V: np.ndarray
    diverged: bool = False
    se: Optional[np.ndarray] = None

    def to_dict(self):
        def arr(a):
            return None if a is None else [None if not np.isfinite(v) else float(v) for v in a]
        return {"L": arr(self.L), "W": arr(self.W), "v_star": self.v_star,
                "pi_star": arr(self.pi_star), "delta_hat": arr(self.delta_hat),
                "V": arr(self.V), "diverged": self.diverged, "se": arr(self.se)}

    def to_json(self):
        return json.dumps(self.to_dict())

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["player", "L", "W", "delta_hat"])
        for i in range(len(self.L)):
            w.writerow([i] + [f"{v:.12g}" for v in (self.L[i], self.W[i], self.delta_hat[i])])
        return buf.getvalue()


def _noise_free(noise):
    return (noise.persistent_variance == 0 and noise.idiosyncratic_variance == 0
            and not np.any(np.asarray(noise.persistent_bias) != 0))


def analytic_loss(net, rules, noise=None, signal=None, on_diverge="raise"):
    """Exact expected losses from the linear decomposition of the limit.

    L_i = sum_k P_ik^2 sigma_k^2 + var(theta)(sum_k P_ik - 1)^2
          + E_i Cov(xi) E_i^T + (E_i . E xi)^2 + V_i.
    A noiseless all-DeGroot profile is scored at its consensus pi . x.
    With noise it raises AllDeGroot, or returns a ``diverged`` report when
    ``on_diverge='marker'``.
    """
    noise = noise or NoiseSpec()
    signal = signal or SignalModel()
    n = net.n
    s2 = signal.sigma_sq_vector(n)
    pi_star, v_star = efficient_weights(s2)
    w_min = min_composite_variance(s2)
    if not np.any(rules.m > 0):
        if _noise_free(noise):
            pi = dg_consensus(net, rules.gamma).pi
            L = np.full(n, float(np.sum(pi ** 2 * s2)))
            nan = np.full(n, np.nan)
            return LossReport(L, nan, v_star, pi_star, nan, np.zeros(n))
        if on_diverge == "marker":
            nan = np.full(n, np.nan)
            return LossReport(nan, nan, v_star, pi_star, nan, nan, diverged=True)
        raise AllDeGroot("DeGroot profile with noise has no finite limit")
    sol = solve_longrun(net, rules.m)
    P, E = sol.P, sol.E
    cov = noise.xi_covariance(n, net)
    mean = noise.xi_mean(n, net)
    seed_part = (P ** 2) @ s2 + signal.theta_variance * (P.sum(axis=1) - 1.0) ** 2
    err_part = np.einsum("ij,jk,ik->i", E, cov, E) + (E @ mean) ** 2
    V = covariance_limit(net, rules, noise).V
    L = seed_part + err_part + V
    W = np.full(n, np.nan)
    for i in range(n):
        if np.any(np.delete(rules.m, i) > 0):
            W[i] = influence(net, rules.m, i, noise, s2).W
    return LossReport(L, W, v_star, pi_star, W - w_min, V)


def _batch_means_se(values, batches):
    """Standard error of the column means from contiguous batch means."""
    R = values.shape[0]
    b = max(2, min(batches, R))
    size = R // b
    means = values[: b * size].reshape(b, size, -1).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(b)


def mc_loss(net, rules, noise=None, signal=None, replicas=10_000, horizon=100_000, seed=None,
            batches=50, tol=1e-12):
    """Monte Carlo loss: simulate each replica's dynamics and average (y - theta)^2.

    Without idiosyncratic noise runs stop once every replica has converged;
    otherwise they last ``horizon`` periods.  Standard errors use batch means.
    The report's ``V`` field holds the number of replicas that did not converge.
    """
    noise = noise or NoiseSpec()
    signal = signal or SignalModel()
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    rng = np.random.default_rng(seed)
    n = net.n
    theta, x, xi = sample_batch(signal, noise, n, replicas, rng, net)
    Y, ok, _ = iterate_batch(net, rules, x, xi, max_T=horizon, tol=tol,
                             nu_variance=noise.idiosyncratic_variance, seed=rng)
    sq = (Y - theta[:, None]) ** 2
    L = sq.mean(axis=0)
    se = _batch_means_se(sq, batches)
    s2 = signal.sigma_sq_vector(n)
    pi_star, v_star = efficient_weights(s2)
    nan = np.full(n, np.nan)
    unconverged = 0 if noise.idiosyncratic_variance > 0 else int(np.sum(~ok))
    return LossReport(L, nan, v_star, pi_star, nan, np.full(n, float(unconverged)), se=se)


LOCUS_NETWORKS = {"complete": make_complete, "directed_circle": make_directed_circle,
                  "star": make_star}


def locus_comparison(net_kind, n, m, varpi):
    """Cumulated-error variances under processing and expressing errors.

    Returns per-player arrays ``omega_hat_processing`` and
    ``omega_hat_expressing`` for a symmetric profile m, plus the gap the
    closed-form identities predict for player 0 (the hub on a star).
    """
    from .closed_forms import locus_gap, star_locus_gap_players
    try:
        net = LOCUS_NETWORKS[net_kind](n)
    except KeyError:
        raise UnsupportedNetwork(f"locus comparison supports {sorted(LOCUS_NETWORKS)}") from None
    mv = check_vector(m, n, "m", low=0.0, low_open=True, high=1.0)
    proc = NoiseSpec(varpi, locus="processing")
    expr = NoiseSpec(varpi, locus="expressing")
    op = np.array([influence(net, mv, i, proc).omega_hat for i in range(n)])
    oe = np.array([influence(net, mv, i, expr).omega_hat for i in range(n)])
    mm = float(mv[0])
    if net_kind == "star":
        predicted = star_locus_gap_players(n, mm, varpi)
    else:
        predicted = locus_gap(net_kind, n, mm, varpi)
    return {"omega_hat_processing": op, "omega_hat_expressing": oe,
            "gap": float(op[0] - oe[0]), "predicted_gap": predicted}
