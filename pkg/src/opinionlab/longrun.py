"""Closed-form long-run opinions and their decompositions.

Everything here is a direct dense solve: the DeGroot consensus weights,
the anchored fixed point y = Mx + (I - M)(Ay + xi), the per-player
influence decomposition, and the stationary covariance of idiosyncratic
fluctuations.
"""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from ._validation import check_realizations, check_vector
from .exceptions import AllDeGroot, Degenerate, InvalidSize, Singular
from .net import stationary_weights

KRON_MAX_N = 30


@dataclass(frozen=True, eq=False)
class DGConsensus:
    pi: np.ndarray
    B0: np.ndarray

    @property
    def relative_influence(self):
        """pi_i / (1 - pi_i), the weight of i's seed relative to all others."""
        return self.pi / (1.0 - self.pi)

    def consensus(self, x):
        return np.asarray(x) @ self.pi


def dg_consensus(net, gamma):
    """Consensus weights of noiseless DeGroot updating: pi_i ∝ rho_i / gamma_i."""
    g = check_vector(gamma, net.n, "gamma", low=0.0, low_open=True, high=1.0)
    rho = stationary_weights(net)
    pi = rho / g
    pi /= pi.sum()
    B0 = np.eye(net.n) - np.diag(g) + g[:, None] * net.A
    return DGConsensus(pi, B0)


def efficient_dg_gamma(net, sigma_sq, gamma_floor=1e-3):
    """Speeds gamma ∝ rho sigma^2 (max 1) that make DeGroot consensus efficient."""
    from .exceptions import GammaOutOfRange
    rho = stationary_weights(net)
    s = check_vector(sigma_sq, net.n, "sigma_sq", low=0.0, low_open=True)
    g = rho * s
    g = g / g.max()
    if g.min() < gamma_floor:
        raise GammaOutOfRange(f"efficient speeds span {g.min():.3g}..1, below floor {gamma_floor}")
    return g


def resolvent(net, m):
    """H = (I - (I - M) A)^{-1}; raises AllDeGroot when m is identically 0."""
    m = check_vector(m, net.n, "m", low=0.0, high=1.0)
    if not np.any(m > 0):
        raise AllDeGroot("all players are DeGroot: opinions have no finite limit")
    n = net.n
    C = np.eye(n) - (1.0 - m)[:, None] * net.A
    try:
        H = np.linalg.solve(C, np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise Singular(str(exc)) from exc
    if not np.all(np.isfinite(H)):
        raise Singular("resolvent is not finite; some component has no anchored player")
    return H


@dataclass(frozen=True, eq=False)
class LongRunSolution:
    """Limit opinions y = P x + E xi.

    ``P = H M`` gives the seed weights (columns of DeGroot players are zero,
    rows sum to one); ``E = H (I - M)`` gives the error coefficients.
    ``Q`` is the block of ``E`` on the DeGroot players' errors.
    """

    y: Optional[np.ndarray]
    P: np.ndarray
    E: np.ndarray
    m: np.ndarray

    @property
    def dg_set(self):
        return np.flatnonzero(self.m == 0)

    @property
    def Q(self):
        return self.E[:, self.dg_set]

    def apply(self, x, xi):
        return np.asarray(x) @ self.P.T + np.asarray(xi) @ self.E.T


def solve_longrun(net, m, x=None, xi=None):
    """Limit of the update rule, independent of gamma.

    ``x`` and ``xi`` may be single vectors or (replicas, n) arrays; if both
    are omitted only the weight matrices are returned.
    """
    m = check_vector(m, net.n, "m", low=0.0, high=1.0)
    H = resolvent(net, m)
    P = H * m[None, :]
    E = H * (1.0 - m)[None, :]
    y = None
    if x is not None:
        x2, single = check_realizations(x, net.n, "x")
        xi2 = np.zeros_like(x2) if xi is None else check_realizations(xi, net.n, "xi")[0]
        y = x2 @ P.T + xi2 @ E.T
        y = y[0] if single else y
    return LongRunSolution(y, P, E, m)


@dataclass(frozen=True, eq=False)
class InfluenceDecomposition:
    """How player i's limit opinion splits into own seed, others and errors.

    y_i = p x_i + (1 - p)(q . x + xi_hat), with xi_hat = xi_hat_coeffs . xi.
    When every other player is DeGroot, ``h`` is infinite, ``p`` is 1 and
    ``error_coeffs`` carries the whole error term.
    """

    i: int
    p: float
    q: np.ndarray
    h: float
    R: np.ndarray
    xi_hat_coeffs: np.ndarray
    error_coeffs: np.ndarray
    xhat_var: float
    omega_hat: float

    @property
    def W(self):
        return self.xhat_var + self.omega_hat

    def to_dict(self):
        return {"p": self.p, "q": self.q.tolist(), "h": self.h, "R": self.R.tolist(),
                "W": self.W, "xhat_var": self.xhat_var, "omega_hat": self.omega_hat}

    def to_json(self):
        return json.dumps(self.to_dict())


def quadratic_error(c, cov, mean):
    """E (c . xi)^2 for xi with the given covariance and mean."""
    return float(c @ cov @ c + (c @ mean) ** 2)


def reach_weights(net, m, i):
    """R^i_j = sum_k A_ik Q^i_kj with Q^i the resolvent of the network minus i.

    Removing i and keeping only the weights among the others is exactly
    (I - alpha^i) A~^i, so no 0/0 arises for rows pointing only at i.
    """
    n = net.n
    others = np.delete(np.arange(n), i)
    mo = m[others]
    C = np.eye(n - 1) - (1.0 - mo)[:, None] * net.A[np.ix_(others, others)]
    try:
        Qi = np.linalg.solve(C, np.eye(n - 1))
    except np.linalg.LinAlgError as exc:
        raise Singular(str(exc)) from exc
    R = np.zeros(n)
    R[others] = net.A[i, others] @ Qi
    return R


def influence(net, m, i, noise=None, sigma_sq=1.0):
    """Decompose player i's long-run opinion given everyone's seed weights."""
    from .rules import NoiseSpec
    n = net.n
    if not 0 <= i < n:
        raise InvalidSize(f"player index {i} out of range")
    m = check_vector(m, n, "m", low=0.0, high=1.0)
    noise = noise or NoiseSpec()
    s2 = check_vector(sigma_sq, n, "sigma_sq", low=0.0, low_open=True)
    cov = noise.xi_covariance(n, net)
    mean = noise.xi_mean(n, net)
    mi = m[i]
    mo = m.copy()
    mo[i] = 0.0
    if not np.any(mo > 0):
        if mi == 0:
            raise Degenerate("every player is DeGroot")
        # others are DeGroot and anchored only through i; Q^i is still finite
        R = reach_weights(net, m, i)
        base = np.zeros(n)
        base[i] = 1.0
        err = (1.0 - mi) / mi * (base + R)
        return InfluenceDecomposition(i, 1.0, np.zeros(n), np.inf, R, np.full(n, np.nan),
                                      err, 0.0, quadratic_error(err, cov, mean))
    R = reach_weights(net, m, i)
    s = float(R @ mo)
    h = 1.0 / s
    p = mi * h / (mi * h + 1.0 - mi)
    q = R * mo / s
    c = h * ((1.0 - mo) * R)
    c[i] = h
    err = (1.0 - p) * c
    return InfluenceDecomposition(i, float(p), q, float(h), R, c, err,
                                  float(np.sum(q ** 2 * s2)), quadratic_error(c, cov, mean))


@dataclass(frozen=True, eq=False)
class CovarianceLimit:
    w: np.ndarray

    @property
    def V(self):
        return np.diag(self.w).copy()


def noise_propagator(net, rules):
    """B = I - Gamma + Gamma (I - M) A, the one-period map of fluctuations."""
    g, m = rules.gamma, rules.m
    return np.eye(net.n) - np.diag(g) + (g * (1.0 - m))[:, None] * net.A


def covariance_limit(net, rules, noise, method="auto"):
    """Stationary covariance of y - E[y | x, xi] under idiosyncratic noise.

    Solves w = Lambda + B w B^T with Lambda_ii = (gamma_i (1 - m_i))^2 varpi0.
    ``method='kron'`` solves the n^2 system directly; ``'lyapunov'`` uses the
    Bartels-Stewart solver, the default above 30 players.
    """
    if not np.any(rules.m > 0):
        raise AllDeGroot("fluctuations grow without bound when every player is DeGroot")
    n = net.n
    lam = (rules.gamma * (1.0 - rules.m)) ** 2 * noise.idiosyncratic_variance
    if noise.idiosyncratic_variance == 0:
        return CovarianceLimit(np.zeros((n, n)))
    B = noise_propagator(net, rules)
    Lam = np.diag(lam)
    if method == "auto":
        method = "kron" if n <= KRON_MAX_N else "lyapunov"
    if method == "kron":
        vec = np.linalg.solve(np.eye(n * n) - np.kron(B, B), Lam.ravel())
        w = vec.reshape(n, n)
    elif method == "lyapunov":
        w = sla.solve_discrete_lyapunov(B, Lam)
    else:
        raise ValueError(f"unknown method {method!r}")
    return CovarianceLimit(0.5 * (w + w.T))
