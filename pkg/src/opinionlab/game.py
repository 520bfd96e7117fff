"""The rule-choice game: best responses, equilibria, optima and comparisons."""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar, root

from .closed_forms import h_circle, h_complete, h_star_hub
from .exceptions import InvalidSize, NoConvergence
from .longrun import dg_consensus, efficient_dg_gamma, influence, solve_longrun
from .loss import analytic_loss, efficient_weights, _noise_free
from .net import make_complete, make_directed_circle, make_star, make_two_stars
from .rules import NoiseSpec, RuleProfile, SignalModel

M_FLOOR = 1e-12


def _defaults(noise, signal):
    return noise or NoiseSpec(), signal or SignalModel()


def _profile(net, m, gamma):
    return RuleProfile.build(net.n, np.clip(m, 0.0, 1.0), 1.0 if gamma is None else gamma)


def player_loss(net, m, i, noise=None, signal=None, gamma=None):
    noise, signal = _defaults(noise, signal)
    return float(analytic_loss(net, _profile(net, m, gamma), noise, signal).L[i])


def best_response(net, m, noise=None, signal=None, i=0, gamma=None):
    """Loss-minimizing m_i given the others' weights (entry i of ``m`` is ignored).

    Uses m_i / (1 - m_i) = W_i / (h_i sigma_i^2).  If every other player is
    DeGroot, any m_i > 0 pins y_i to the player's own modified seed, so the
    best reply is 1 with noise and 0 (join the consensus) without.  With
    idiosyncratic noise the loss is minimized numerically.
    """
    noise, signal = _defaults(noise, signal)
    n = net.n
    m = np.array(m, dtype=np.float64)
    if m.shape != (n,):
        raise InvalidSize(f"m must have length {n}")
    s2 = signal.sigma_sq_vector(n)
    others = np.delete(m, i)
    if noise.idiosyncratic_variance > 0:
        def f(v):
            mm = m.copy()
            mm[i] = v
            return player_loss(net, mm, i, noise, signal, gamma)
        lo = M_FLOOR if not np.any(others > 0) else 0.0
        res = minimize_scalar(f, bounds=(lo, 1.0), method="bounded",
                              options={"xatol": 1e-11})
        cands = [(res.fun, res.x), (f(1.0), 1.0)]
        return float(min(cands)[1])
    if not np.any(others > 0):
        return 0.0 if _noise_free(noise) else 1.0
    d = influence(net, m, i, noise, s2)
    return float(d.W / (d.W + d.h * s2[i]))


def best_response_map(net, m, noise=None, signal=None, gamma=None, players=None):
    players = range(net.n) if players is None else players
    return np.array([best_response(net, m, noise, signal, i, gamma) for i in players])


def best_response_curve(net, noise, signal=None, grid=None, i=0, j=1):
    """Player i's best reply as player j's weight sweeps ``grid`` (two players)."""
    grid = np.linspace(0.01, 1.0, 100) if grid is None else np.asarray(grid)
    out = []
    for v in grid:
        m = np.zeros(net.n)
        m[j] = v
        out.append(best_response(net, m, noise, signal, i))
    return grid, np.array(out)


@dataclass(eq=False)
class EquilibriumResult:
    m_star: np.ndarray
    iterations: int
    residual: float
    losses: object
    trace: list = field(default_factory=list)
    method: str = ""
    gamma: Optional[np.ndarray] = None

    def to_dict(self):
        return {"m_star": self.m_star.tolist(), "iterations": self.iterations,
                "residual": self.residual, "method": self.method,
                "L": self.losses.L.tolist() if self.losses is not None else None}

    def to_json(self):
        return json.dumps(self.to_dict())


def _expand(u, classes, n):
    m = np.empty(n)
    for c, idx in enumerate(classes):
        m[idx] = u[c]
    return m


def symmetry_classes(net, kind=None):
    """Index groups that share a weight in a symmetric equilibrium."""
    n = net.n
    if kind in ("complete", "directed_circle", "symmetric"):
        return [list(range(n))]
    if kind == "star":
        return [[0], list(range(1, n))]
    return [[i] for i in range(n)]


def nash_solve(net, noise=None, signal=None, m_init=None, damping=0.5, tol=1e-10,
               max_iter=100_000, classes=None, gamma=None, polish=True):
    """Nash equilibrium of the seed-weight game.

    Damped simultaneous best responses m <- (1 - damping) m + damping BR(m),
    accelerated by a Newton-type root polish once close.  ``classes`` groups
    players constrained to share a weight (one group: a scalar root solved by
    bisection).  Without any noise the equilibrium is the DeGroot boundary,
    reported with efficient speeds gamma ∝ rho sigma^2.
    """
    noise, signal = _defaults(noise, signal)
    n = net.n
    if _noise_free(noise):
        g = efficient_dg_gamma(net, signal.sigma_sq_vector(n))
        m0 = np.zeros(n)
        rep = analytic_loss(net, RuleProfile(m0, g), noise, signal)
        return EquilibriumResult(m0, 0, 0.0, rep, [], "degroot-boundary", g)
    classes = classes or [[i] for i in range(n)]
    reps = [c[0] for c in classes]
    k = len(classes)
    varpi = float(np.mean(np.diag(noise.xi_covariance(n, net))))
    floor = varpi / (1.0 + varpi)

    def G(u):
        m = _expand(u, classes, n)
        return np.array([best_response(net, m, noise, signal, r, gamma) for r in reps])

    trace = []
    method = ""
    if m_init is None:
        u = np.full(k, np.clip(max(varpi, 1e-12) ** (1 / 3), floor, 1.0))
    else:
        u = np.asarray(m_init, dtype=np.float64)
        u = u[reps] if u.shape == (n,) and k != n else np.broadcast_to(u, (k,)).copy()
    it = 0
    res = np.inf
    if k == 1:
        f = lambda v: G(np.array([v]))[0] - v
        lo = max(floor, M_FLOOR)
        if f(lo) >= 0 >= f(1.0):
            u = np.array([brentq(f, lo, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)])
            method = "scalar-bisection"
    if not method:
        switch = 1e-6
        while it < max_iter:
            step = G(u) - u
            res = float(np.max(np.abs(step)))
            trace.append((it, res))
            if res < tol:
                method = "damped-br"
                break
            if polish and res < switch:
                sol = root(lambda v: G(np.clip(v, M_FLOOR, 1.0)) - np.clip(v, M_FLOOR, 1.0),
                           u, method="hybr", options={"xtol": 1e-15})
                cand = np.clip(sol.x, M_FLOOR, 1.0)
                r2 = float(np.max(np.abs(G(cand) - cand)))
                trace.append((it, r2))
                if r2 < tol:
                    u, method = cand, "damped-br+root"
                    break
                switch /= 100
            u = np.clip(u + damping * step, 0.0, 1.0)
            it += 1
        else:
            raise NoConvergence(f"best-response iteration stalled at residual {res:.3g}", trace)
    m_star = _expand(u, classes, n)
    g = None if gamma is None else np.broadcast_to(gamma, (n,)).astype(float)
    residual = float(np.max(np.abs(best_response_map(net, m_star, noise, signal, gamma) - m_star)))
    if residual > max(1e-8, 10 * tol):
        raise NoConvergence(f"equilibrium residual {residual:.3g} too large", trace)
    rep = analytic_loss(net, _profile(net, m_star, gamma), noise, signal)
    return EquilibriumResult(m_star, it, residual, rep, trace, method, g)


@dataclass(eq=False)
class SocialOptimum:
    m: np.ndarray
    total_loss: float
    losses: object

    def to_dict(self):
        return {"m_star_star": self.m.tolist(), "total_loss": self.total_loss,
                "L": self.losses.L.tolist()}


def total_loss(net, m, noise=None, signal=None, gamma=None):
    noise, signal = _defaults(noise, signal)
    return float(np.sum(analytic_loss(net, _profile(net, m, gamma), noise, signal).L))


def social_optimum(net, noise=None, signal=None, classes=None, symmetric_hint=False,
                   starts=8, seed=0, gamma=None, m_min=1e-9):
    """Weights minimizing the sum of losses (local optimum, multi-start).

    With one weight class the search is a log-grid scan followed by bounded
    Brent refinement; otherwise Powell's derivative-free method runs from
    ``starts`` random points inside [m_min, 1].
    """
    noise, signal = _defaults(noise, signal)
    n = net.n
    if symmetric_hint and classes is None:
        classes = [list(range(n))]
    classes = classes or [[i] for i in range(n)]
    k = len(classes)

    def F(u):
        return total_loss(net, _expand(np.clip(u, m_min, 1.0), classes, n), noise, signal, gamma)

    if k == 1:
        grid = np.geomspace(m_min, 1.0, 241)
        vals = np.array([F([v]) for v in grid])
        j = int(np.argmin(vals))
        a, b = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
        r = minimize_scalar(lambda v: F([v]), bounds=(a, b), method="bounded",
                            options={"xatol": 1e-12})
        u = np.array([r.x if r.fun <= vals[j] else grid[j]])
    else:
        rng = np.random.default_rng(seed)
        best = None
        for s in range(starts):
            u0 = np.exp(rng.uniform(np.log(1e-3), 0.0, k)) if s else np.full(k, 0.1)
            r = minimize(F, u0, method="Powell", bounds=[(m_min, 1.0)] * k,
                         options={"xtol": 1e-10, "ftol": 1e-14, "maxfev": 20000})
            if best is None or r.fun < best.fun:
                best = r
        u = np.clip(best.x, m_min, 1.0)
    m = _expand(u, classes, n)
    rep = analytic_loss(net, _profile(net, m, gamma), noise, signal)
    return SocialOptimum(m, float(np.sum(rep.L)), rep)


def welfare_gradient(net, m, noise=None, signal=None, step=1e-6, gamma=None):
    """Central-difference gradient of the total loss with respect to each m_i."""
    m = np.asarray(m, dtype=np.float64)
    g = np.empty(net.n)
    for i in range(net.n):
        e = np.zeros(net.n)
        e[i] = min(step, 0.5 * m[i], 0.5 * (1 - m[i])) or step
        g[i] = (total_loss(net, m + e, noise, signal, gamma)
                - total_loss(net, m - e, noise, signal, gamma)) / (2 * e[i])
    return g


welfare_gradient_at_nash = welfare_gradient


def own_loss_gradient(net, m, noise=None, signal=None, step=1e-6, gamma=None):
    """dL_i/dm_i for each i; vanishes at a Nash equilibrium."""
    m = np.asarray(m, dtype=np.float64)
    g = np.empty(net.n)
    for i in range(net.n):
        e = np.zeros(net.n)
        e[i] = min(step, 0.5 * m[i], 0.5 * (1 - m[i])) or step
        g[i] = (player_loss(net, m + e, i, noise, signal, gamma)
                - player_loss(net, m - e, i, noise, signal, gamma)) / (2 * e[i])
    return g


# ---------------------------------------------------------------- networks

def _comparison_noise(n, varpi, correlation, varpi0):
    if varpi0 is None or varpi0 == varpi:
        return NoiseSpec(varpi, correlation=correlation)
    sd = np.full(n, np.sqrt(varpi))
    sd[0] = np.sqrt(varpi0)
    if correlation == "independent":
        C = np.diag(sd ** 2)
    else:
        C = np.outer(sd, sd)
    return NoiseSpec(varpi, correlation="custom", covariance=C)


def compare_networks(n, varpi, correlation="independent", varpi0=None):
    """Equilibria of the complete network, directed circle and star.

    Each row has m_star (the peripheral weight on the star), m0_star (the
    hub's), delta_hat = W - 1/(n - 1) of a non-hub player, the hub's
    delta_hat on the star, L_star, and the gap between the generic h and its
    closed form.
    """
    if n < 3:
        raise InvalidSize("network comparison needs n >= 3")
    rows = []
    for name, make in (("complete", make_complete), ("directed_circle", make_directed_circle),
                       ("star", make_star)):
        net = make(n)
        noise = _comparison_noise(n, varpi, correlation, varpi0 if name == "star" else None)
        kind = "star" if name == "star" else "symmetric"
        eq = nash_solve(net, noise, classes=symmetry_classes(net, kind))
        m = eq.m_star
        i = 1
        d = influence(net, m, i, noise)
        dh = d.W - 1.0 / (n - 1)
        if name == "complete":
            h_gap = d.h - h_complete(n, m[0])
        elif name == "directed_circle":
            h_gap = d.h - h_circle(n, m[0])
        else:
            h_gap = influence(net, m, 0, noise).h - h_star_hub(m[1])
        hub = influence(net, m, 0, noise)
        rows.append({"network": name, "n": n, "varpi": varpi, "correlation": correlation,
                     "m_star": float(m[1]), "m0_star": float(m[0]), "delta_hat": float(dh),
                     "delta_hat_hub": float(hub.W - 1.0 / (n - 1)),
                     "L_star": float(eq.losses.L[1]), "residual": eq.residual,
                     "h_closed_form_gap": float(h_gap)})
    return rows


# ------------------------------------------------------------ polarization

@dataclass
class PolarizationReport:
    """Within-star dispersion d and between-star dispersion D at weight m.

    ``D`` is the large-star value 2 (1 - m)^2 varpi0 / m^2, ``D_leading`` its
    small-m form 2 varpi0 / m^2, ``D_finite`` the exact value for the given
    star size and hub rule.
    """

    m: float
    d: float
    D: float
    D_leading: float
    D_finite: float
    m0: float
    loss: float


def _star_mean_weights(n_per_star, m, m0):
    """Seed and error weights of the mean peripheral opinion in one star."""
    net = make_star(n_per_star)
    mv = np.full(n_per_star, m)
    mv[0] = m0
    sol = solve_longrun(net, mv)
    return sol.P[1:].mean(axis=0), sol.E[1:].mean(axis=0), sol


def _star_cov(n_per_star, varpi, varpi0):
    c = np.full(n_per_star, varpi)
    c[0] = varpi0
    return c


def finite_star_D(n_per_star, m, varpi, varpi0, m0=0.0, theta_variance=1.0):
    pbar, ebar, _ = _star_mean_weights(n_per_star, m, m0)
    var = np.sum(pbar ** 2) + theta_variance * (pbar.sum() - 1) ** 2 + np.sum(
        ebar ** 2 * _star_cov(n_per_star, varpi, varpi0))
    return 2.0 * var


def finite_star_spoke_loss(n_per_star, m, varpi, varpi0, m0=0.0):
    _, _, sol = _star_mean_weights(n_per_star, m, m0)
    c = _star_cov(n_per_star, varpi, varpi0)
    Ls = np.sum(sol.P[1:] ** 2, axis=1) + np.sum(sol.E[1:] ** 2 * c, axis=1)
    return float(Ls.mean())


def benevolent_hub_m0(n_per_star, m, varpi, varpi0):
    """Hub weight minimizing the average peripheral loss given spokes' m."""
    r = minimize_scalar(lambda v: finite_star_spoke_loss(n_per_star, m, varpi, varpi0, v),
                        bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-10})
    return float(r.x)


def large_star_loss(m, varpi, varpi0):
    """Per-player loss (d + D)/2 in the large-star limit with a DeGroot hub."""
    from .closed_forms import polarization_D, polarization_d
    return 0.5 * (polarization_d(m, varpi) + polarization_D(m, varpi0))


def polarization_optimum(varpi, varpi0):
    r = minimize_scalar(lambda v: large_star_loss(v, varpi, varpi0), bounds=(1e-6, 1.0),
                        method="bounded", options={"xatol": 1e-12})
    return float(r.x)


def polarization_study(n_per_star, m_grid, varpi, varpi0, hub_mode="dg"):
    """d, D and loss across ``m_grid`` for two disconnected stars."""
    from .closed_forms import polarization_D, polarization_D_leading, polarization_d
    if hub_mode not in ("dg", "benevolent"):
        raise ValueError("hub_mode must be 'dg' or 'benevolent'")
    out = []
    for m in np.atleast_1d(m_grid):
        m = float(m)
        m0 = 0.0 if hub_mode == "dg" else benevolent_hub_m0(n_per_star, m, varpi, varpi0)
        out.append(PolarizationReport(
            m, polarization_d(m, varpi), polarization_D(m, varpi0),
            polarization_D_leading(m, varpi0),
            finite_star_D(n_per_star, m, varpi, varpi0, m0), m0,
            large_star_loss(m, varpi, varpi0)))
    return out


def polarization_mc(n_per_star, m, varpi, varpi0, replicas=10_000, seed=None, m0=0.0):
    """Monte Carlo d and D for two independent stars sharing the state.

    Each replica draws every player's seed and persistent error and maps
    them to the exact limit opinions.  Returns estimates and standard errors.
    """
    rng = np.random.default_rng(seed)
    net = make_two_stars(n_per_star)
    k = n_per_star
    mv = np.full(2 * k, m)
    mv[0] = mv[k] = m0
    sol = solve_longrun(net, mv)
    rows = [1, 2, k + 1, k + 2]
    P = sol.P[rows]
    E = sol.E[rows]
    Pbar = np.stack([sol.P[1:k].mean(0), sol.P[k + 1:].mean(0)])
    Ebar = np.stack([sol.E[1:k].mean(0), sol.E[k + 1:].mean(0)])
    sd = np.sqrt(np.tile(_star_cov(k, varpi, varpi0), 2))
    dd, DD = [], []
    chunk = 2000
    for start in range(0, replicas, chunk):
        r = min(chunk, replicas - start)
        theta = rng.standard_normal(r)
        x = theta[:, None] + rng.standard_normal((r, 2 * k))
        xi = rng.standard_normal((r, 2 * k)) * sd
        y = x @ P.T + xi @ E.T
        ybar = x @ Pbar.T + xi @ Ebar.T
        dd.append(np.concatenate([(y[:, 0] - y[:, 1]) ** 2, (y[:, 2] - y[:, 3]) ** 2]))
        DD.append((ybar[:, 0] - ybar[:, 1]) ** 2)
    dd = np.concatenate(dd)
    DD = np.concatenate(DD)
    return {"d": float(dd.mean()), "d_se": float(dd.std(ddof=1) / np.sqrt(dd.size)),
            "D": float(DD.mean()), "D_se": float(DD.std(ddof=1) / np.sqrt(DD.size))}


# ------------------------------------------------------ precision-scaled gamma

def precision_scaled_gamma_check(net, sigma_sq_samples, gamma_floor=1e-3):
    """DeGroot with gamma_i = mu_i sigma_i^2, mu ∝ rho, aggregates efficiently.

    For each sigma^2 vector returns the consensus weights, the efficient
    weights and the gap between consensus variance and v*.
    """
    out = []
    for s2 in np.atleast_2d(sigma_sq_samples):
        g = efficient_dg_gamma(net, s2, gamma_floor)
        pi = dg_consensus(net, g).pi
        pi_star, v_star = efficient_weights(s2)
        out.append({"gamma": g, "pi": pi, "pi_star": pi_star,
                    "variance_gap": float(np.sum(pi ** 2 * s2) - v_star)})
    return out


def result3_quantities(net, varpi, kind="symmetric", player=0):
    """Equilibrium m*, p* - pi*, omega_hat* and L* - v* for one player."""
    noise = NoiseSpec(varpi)
    eq = nash_solve(net, noise, classes=symmetry_classes(net, kind))
    d = influence(net, eq.m_star, player, noise)
    return {"m_star": float(eq.m_star[player]), "p_gap": float(d.p - eq.losses.pi_star[player]),
            "omega_hat": d.omega_hat, "loss_gap": float(eq.losses.L[player] - eq.losses.v_star)}
