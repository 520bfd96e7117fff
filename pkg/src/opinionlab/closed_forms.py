"""Hand-derived formulas for the canonical networks and the two-player game.

These are independent of the generic linear-algebra path and serve as
cross-checks for it.
"""

import numpy as np
from scipy.optimize import brentq


def h_complete(n, m):
    return 1.0 + (1.0 - m) / (m * (n - 1))


def h_circle(n, m):
    return 1.0 / (1.0 - (1.0 - m) ** (n - 1))


def h_star_hub(m):
    return 1.0 / m


def circle_decay_weights(n, m):
    """Weights of psi(z): the k-step neighbour discounted by (1 - m)^(k-1)."""
    w = (1.0 - m) ** np.arange(n - 1)
    return w / w.sum()


def xi_hat_coeffs_complete(n, m, i=0):
    """Cumulated error h xi_i + (1 - m)/m * mean of the others' errors."""
    c = np.full(n, (1.0 - m) / (m * (n - 1)))
    c[i] = h_complete(n, m)
    return c


def xi_hat_coeffs_circle(n, m, i=0):
    c = np.zeros(n)
    c[(i + 1 + np.arange(n - 1)) % n] = circle_decay_weights(n, m) * (1.0 - m) / m
    c[i] = h_circle(n, m)
    return c


def xi_hat_coeffs_star_hub(n, m):
    """(xi_0 + (1 - m) mean spoke error) / m for the hub."""
    c = np.full(n, (1.0 - m) / (m * (n - 1)))
    c[0] = 1.0 / m
    return c


def star_spoke_terms(n, m0, m):
    """(h_i, q_0, xi_hat coefficients) for a spoke when the hub uses m0."""
    k = n - 1
    rho0 = m0 / ((1.0 - m0) * m) - 1.0 / k
    q0 = (1.0 / k + rho0) / (1.0 + rho0)
    h = 1.0 + 1.0 / (m * k * (1.0 + rho0))
    c = xi_hat_coeffs_star_hub(n, m) / (1.0 + rho0)
    c[1] += 1.0 + 1.0 / (k * (1.0 + rho0))
    return h, q0, c


def locus_gap(kind, n, m, varpi):
    """Processing-minus-expressing cumulated-error variance for the canonical nets.

    For the star the gap is at the hub and ``n`` there counts peripheral
    players only; ``star_locus_gap_players`` takes the total player count.
    """
    if kind == "directed_circle":
        return 0.0
    if kind == "complete":
        return varpi * (n - 2) / (n - 1)
    if kind == "star":
        return varpi * (2 - m) * (n - 1) / (m * n)
    raise ValueError(kind)


def star_locus_gap_players(n_players, m, varpi):
    return locus_gap("star", n_players - 1, m, varpi)


# two players, unit seed variances, independent errors of variance varpi

def two_player_p(m_i, m_j):
    return m_i / (m_i + (1.0 - m_i) * m_j)


def two_player_omega_hat(m_j, varpi):
    """E xi_hat_i^2 with xi_hat_i = (xi_i + (1 - m_j) xi_j) / m_j."""
    return varpi * (1.0 + (1.0 - m_j) ** 2) / m_j ** 2


def two_player_best_response(m_j, varpi):
    w = two_player_omega_hat(m_j, varpi)
    return m_j * (1.0 + w) / (1.0 + m_j * (1.0 + w))


def two_player_nash(varpi):
    """Symmetric root of m = w/(1 + w), w = varpi (1 + (1 - m)^2) / m^2."""
    def f(m):
        w = two_player_omega_hat(m, varpi)
        return m - w / (1.0 + w)
    lo = varpi / (1.0 + varpi)
    return brentq(f, lo, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def two_player_loss(m_i, m_j, varpi):
    """p^2 + (1 - p)^2 (1 + E xi_hat_i^2) for unit seed variances."""
    p = two_player_p(m_i, m_j)
    return p ** 2 + (1.0 - p) ** 2 * (1.0 + two_player_omega_hat(m_j, varpi))


def two_player_symmetric_loss(m, varpi):
    """I(p) + p^2 X + (1 - p)^2 X at a symmetric profile, p = 1/(2 - m)."""
    p = 1.0 / (2.0 - m)
    X = varpi * (1.0 - m) ** 2 / m ** 2
    return p ** 2 + (1 - p) ** 2 + p ** 2 * X + (1 - p) ** 2 * X


def complete_nash_small_varpi(n, varpi):
    return varpi ** (1 / 3) * (n / (n - 1) ** 2) ** (1 / 3)


# two disconnected stars with DeGroot hubs, large-star limit

def polarization_d(m, varpi):
    return 2 * m ** 2 + 2 * (1 - m) ** 2 * varpi


def polarization_D(m, varpi0):
    return 2 * (1 - m) ** 2 * varpi0 / m ** 2


def polarization_D_leading(m, varpi0):
    return 2 * varpi0 / m ** 2
