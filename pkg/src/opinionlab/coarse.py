"""Coarse communication: binary reports, inference from the population share.

Agents report a = 1 when y_i + b_i > 0.  The share f reporting 0 is read
through phi = h^{-1}, with h(y) = G(-y) the share of zeros when every opinion
equals y, plus a common inference error xi.  The large-population limit
reduces the dynamics to a scalar fixed point.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.optimize import brentq, minimize_scalar
from scipy.special import logsumexp, ndtri_exp
from scipy.stats import norm

from .exceptions import NoRoot

GH_NODES = 64
_NODES, _WEIGHTS = hermegauss(GH_NODES)
_WEIGHTS = _WEIGHTS / np.sqrt(2 * np.pi)
_LOG_WEIGHTS = np.log(_WEIGHTS)


@dataclass(frozen=True)
class CoarseModel:
    """Gaussian preference shifts b ~ N(b_mean, b_sd^2), seed noise sd ``sigma``."""

    b_mean: float = 0.0
    b_sd: float = 1.0
    sigma: float = 1.0
    varpi: float = 0.0
    gamma: float = 1.0

    def h(self, y):
        """Share reporting 0 when everyone holds opinion y: P(y + b < 0)."""
        return norm.sf((np.asarray(y) + self.b_mean) / self.b_sd)

    def phi(self, f):
        """Inverse of h."""
        return self.b_sd * norm.isf(np.asarray(f)) - self.b_mean

    def expected_share(self, c, m):
        """E h(m delta + c) over delta ~ N(0, sigma^2), by Gauss-Hermite."""
        c = np.asarray(c, dtype=np.float64)
        return np.tensordot(self.h(c[..., None] + m * self.sigma * _NODES), _WEIGHTS, axes=1)

    def population_opinion(self, c, m):
        """phi(E h(m delta + c)), evaluated in log space so it stays exact in the tails."""
        c = np.asarray(c, dtype=np.float64)
        u = (c[..., None] + m * self.sigma * _NODES + self.b_mean) / self.b_sd
        log_f = logsumexp(norm.logsf(u) + _LOG_WEIGHTS, axis=-1)
        log_g = logsumexp(norm.logcdf(u) + _LOG_WEIGHTS, axis=-1)
        z = np.where(log_f < log_g, -ndtri_exp(np.minimum(log_f, 0.0)),
                     ndtri_exp(np.minimum(log_g, 0.0)))
        return self.b_sd * z - self.b_mean


@dataclass
class CoarseOutcome:
    """Long-run population opinion and drift.

    For m = 0 with xi != 0 there is no finite limit: ``y_limit`` is +-inf,
    ``unanimous_action`` is 1 (xi > 0) or 0 (xi < 0).
    """

    y_limit: float
    xi_hat: float
    f_path: np.ndarray
    unanimous_action: Optional[int] = None


def share_path(model, theta, m, xi, T=200):
    """Mean-field share of zero reports, period by period, starting at y_i = x_i.

    Each period every agent moves to m x_i + (1 - m)(phi(f) + xi), the
    gamma = 1 form of the update.
    """
    f = float(model.expected_share(theta, 1.0))
    path = [f]
    for _ in range(T):
        if f <= 0.0 or f >= 1.0:
            path.append(f)
            continue
        z = model.phi(f) + xi
        f = float(model.expected_share(m * theta + (1 - m) * z, m))
        path.append(f)
    return np.array(path)


def coarse_longrun(model, theta, m, xi=0.0, T=200):
    """Solve y = phi(E h(m(theta + delta) + (1 - m)(y + xi))) for the limit y."""
    path = share_path(model, theta, m, xi, T)
    if m == 0:
        if xi == 0:
            y = float(model.phi(path[0]))
            return CoarseOutcome(y, y - theta, path)
        s = 1 if xi > 0 else 0
        y = np.inf if xi > 0 else -np.inf
        return CoarseOutcome(y, y, path, unanimous_action=s)

    def F(y):
        return float(model.population_opinion(m * theta + (1 - m) * (y + xi), m)) - y

    center = theta + (1 - m) * xi / m
    width = 1.0 + abs(center - theta)
    for _ in range(60):
        a, b = center - width, center + width
        fa, fb = F(a), F(b)
        if np.isfinite(fa) and np.isfinite(fb) and fa * fb <= 0:
            y = brentq(F, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)
            return CoarseOutcome(y, y - theta, path)
        width *= 1.5
    raise NoRoot(f"no sign change of the fixed-point map around {center:.4g}")


def _echo_variance(model, m, nodes=16):
    """E (xi_hat + xi)^2 over xi ~ N(0, varpi) using the nonlinear drift."""
    z, w = hermegauss(nodes)
    w = w / np.sqrt(2 * np.pi)
    sd = np.sqrt(model.varpi)
    vals = [coarse_longrun(model, 0.0, m, sd * zi, T=0).xi_hat + sd * zi for zi in z]
    return float(np.dot(w, np.square(vals)))


@dataclass
class CoarseEquilibrium:
    m_star: float
    m_social: float
    m_star_numeric: float
    m_social_numeric: float


def coarse_equilibrium(model, varpi=None):
    """Equilibrium and efficient m in the coarse model.

    ``m_star`` = varpi^(1/3) and ``m_social`` = varpi^(1/4) are the small-noise
    closed forms.  The numeric counterparts minimize the variance of the
    estimation error: the equilibrium solves m = K/(1 + K) with K the
    variance of the cumulated error from the nonlinear fixed point, and the
    optimum minimizes m^2 sigma^2 + (1 - m)^2 varpi / m^2.
    """
    if varpi is not None:
        model = CoarseModel(model.b_mean, model.b_sd, model.sigma, varpi, model.gamma)
    v = model.varpi
    if v == 0:
        return CoarseEquilibrium(0.0, 0.0, 0.0, 0.0)
    s2 = model.sigma ** 2

    def gap(m):
        K = _echo_variance(model, m) / s2
        return K / (1 + K) - m

    lo, hi = 0.2 * v ** (1 / 3), min(1.0, 5 * v ** (1 / 3))
    m_num = brentq(gap, lo, hi, xtol=1e-12)
    r = minimize_scalar(lambda m: m * m * s2 + (1 - m) ** 2 * v / m ** 2,
                        bounds=(1e-6, 1.0), method="bounded", options={"xatol": 1e-12})
    return CoarseEquilibrium(v ** (1 / 3), v ** 0.25, float(m_num), float(r.x))


def simulate_agents(model, theta, m, xi, n_agents=10_000, T=200, seed=None, tol=1e-12):
    """Finite-population dynamics with every agent observing the whole population.

    Returns (population opinion phi(f_T), mean individual opinion, share path).
    """
    rng = np.random.default_rng(seed)
    b = model.b_mean + model.b_sd * rng.standard_normal(n_agents)
    x = theta + model.sigma * rng.standard_normal(n_agents)
    y = x.copy()
    g = model.gamma
    fs = []
    for _ in range(T):
        f = float(np.mean(y + b < 0))
        fs.append(f)
        if f <= 0 or f >= 1:
            break
        z = model.phi(f) + xi
        y_new = (1 - g) * y + g * (m * x + (1 - m) * z)
        if np.max(np.abs(y_new - y)) < tol:
            y = y_new
            break
        y = y_new
    f = float(np.mean(y + b < 0))
    return float(model.phi(f)), float(y.mean()), np.array(fs + [f])
