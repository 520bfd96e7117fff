"""Acceptance criteria 1-11, one PASS/FAIL line each.

Criteria that cannot hold as stated are marked ``xfail(strict=True)``: the
check runs in full, prints FAIL, and the attainable parts are asserted by a
companion test.
"""

import functools
import time

import numpy as np
import pytest

from opinionlab import closed_forms as cf
from opinionlab.coarse import CoarseModel, coarse_equilibrium, share_path, simulate_agents, \
    coarse_longrun
from opinionlab.game import (compare_networks, nash_solve, player_loss, polarization_mc,
                             polarization_optimum, result3_quantities, social_optimum,
                             welfare_gradient)
from opinionlab.closed_forms import polarization_D, polarization_D_leading, polarization_d
from opinionlab.longrun import covariance_limit, dg_consensus, influence, noise_propagator, \
    solve_longrun
from opinionlab.loss import locus_comparison
from opinionlab.net import make_complete, make_directed_circle, make_star, random_network
from opinionlab.rules import NoiseSpec, Realization, RuleProfile, SignalModel, sample_realization
from opinionlab.sim import (Protocol, every_kth_update_protocol, protocol_invariance_check,
                            random_covering_protocol, run)

from conftest import random_instance

TWO = make_complete(2)


@pytest.fixture
def report(capsys):
    def emit(number, checks):
        ok = all(passed for passed, _ in checks.values())
        detail = "; ".join(f"{k}={'ok' if p else 'FAIL'} ({d})" for k, (p, d) in checks.items())
        with capsys.disabled():
            print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} | {detail}")
        return ok
    return emit


def test_criterion_01_two_player_social_optimum(report):
    checks = {}
    for varpi, target in ((1e-4, 0.13), (1e-3, 0.21)):
        t0 = time.perf_counter()
        m = social_optimum(TWO, NoiseSpec(varpi), symmetric_hint=True).m[0]
        dt = time.perf_counter() - t0
        checks[f"varpi={varpi:g}"] = (abs(m - target) <= 0.01 and dt < 1.0,
                                      f"m**={m:.4f}, {dt:.2f}s")
    assert report(1, checks)


def test_criterion_02_two_player_nash(report):
    checks = {}
    for varpi in (1e-2, 1e-3, 1e-4):
        gap = float(np.max(np.abs(nash_solve(TWO, NoiseSpec(varpi)).m_star
                                  - cf.two_player_nash(varpi))))
        checks[f"root {varpi:g}"] = (gap <= 1e-9, f"gap={gap:.1e}")
    r = nash_solve(TWO, NoiseSpec(1e-9)).m_star[0] / (2e-9) ** (1 / 3)
    checks["m*/(2varpi)^1/3"] = (0.95 <= r <= 1.05, f"{r:.4f}")
    r = social_optimum(TWO, NoiseSpec(1e-8), symmetric_hint=True).m[0] / (4e-8) ** 0.25
    checks["m**/(4varpi)^1/4"] = (abs(r - 1) <= 0.10, f"{r:.4f}")
    assert report(2, checks)


def test_criterion_03_oracle_equivalence(report):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    sim_gap = gamma_gap = seed_gap = 0.0
    for _ in range(100):
        net, m, g = random_instance(rng)
        x, xi = rng.normal(size=net.n), rng.normal(size=net.n)
        r = Realization(0.0, x, xi, 0.0, 0)
        y = solve_longrun(net, m, x, xi).y
        a = run(net, RuleProfile(m, g), r, tol=1e-13)
        b = run(net, RuleProfile(m, rng.uniform(0.2, 1.0, net.n)), r, tol=1e-13)
        assert a.converged and b.converged
        sim_gap = max(sim_gap, np.max(np.abs(a.y_final - y)))
        gamma_gap = max(gamma_gap, np.max(np.abs(a.y_final - b.y_final)))
        dg = m == 0
        if dg.any():
            x2 = x.copy()
            x2[dg] += rng.normal(size=int(dg.sum())) * 5
            seed_gap = max(seed_gap, np.max(np.abs(solve_longrun(net, m, x2, xi).y - y)))
    dt = time.perf_counter() - t0
    checks = {"sim vs solve": (sim_gap <= 1e-8, f"{sim_gap:.1e}"),
              "gamma invariance": (gamma_gap <= 1e-8, f"{gamma_gap:.1e}"),
              "DG seed irrelevance": (seed_gap <= 1e-10, f"{seed_gap:.1e}"),
              "runtime": (dt < 30, f"{dt:.1f}s")}
    assert report(3, checks)


def test_criterion_04_divergence(report):
    rng = np.random.default_rng(4)
    exceeded = 0
    for s in range(20):
        net = random_network(int(rng.integers(2, 7)), rng)
        g = rng.uniform(0.3, 1.0, net.n)
        r = sample_realization(SignalModel(), NoiseSpec(100.0), net.n, seed=s)
        drift = float(dg_consensus(net, g).pi @ (g * r.xi))
        assert abs(drift) > 1e-6
        # opinions grow linearly at rate |drift|; allow twice the time to reach 1e6
        horizon = int(2e6 / abs(drift)) + 10_000
        tr = run(net, RuleProfile(np.zeros(net.n), g), r, max_T=horizon,
                 blowup_threshold=1e6, detect_drift=False)
        exceeded += tr.reason == "blowup" and np.max(np.abs(tr.y_final)) > 1e6
    net = make_star(4)
    rules = RuleProfile(np.zeros(4), np.full(4, 0.5))
    early, late = [], []
    for s in range(100):
        r = Realization(0.0, np.zeros(4), np.zeros(4), 0.01, s)
        tr = run(net, rules, r, max_T=100_000, record_every=1000, tol=0.0, detect_drift=False)
        early.append(tr.ys[tr.times == 1000][0])
        late.append(tr.ys[tr.times == 100_000][0])
    ratio = np.var(late, axis=0, ddof=1) / np.var(early, axis=0, ddof=1)
    checks = {"DG blow-up": (exceeded == 20, f"{exceeded}/20 runs"),
              "eta variance growth": (bool(np.all(ratio >= 10)), f"min ratio {ratio.min():.1f}")}
    assert report(4, checks)


def test_criterion_05_closed_forms(report):
    worst = 0.0
    for n in (3, 5, 10):
        for m in (0.05, 0.2, 0.5):
            mv = np.full(n, m)
            c = influence(make_complete(n), mv, 0)
            d = influence(make_directed_circle(n), mv, 0)
            s = influence(make_star(n), mv, 0)
            worst = max(worst, abs(c.h - cf.h_complete(n, m)), abs(d.h - cf.h_circle(n, m)),
                        abs(s.h - cf.h_star_hub(m)), abs(s.h - 1 / m),
                        np.max(np.abs(c.xi_hat_coeffs - cf.xi_hat_coeffs_complete(n, m))),
                        np.max(np.abs(d.xi_hat_coeffs - cf.xi_hat_coeffs_circle(n, m))),
                        np.max(np.abs(s.xi_hat_coeffs - cf.xi_hat_coeffs_star_hub(n, m))))
    locus = 0.0
    for kind in ("complete", "directed_circle", "star"):
        for n in (3, 5, 10):
            for m in (0.05, 0.2, 0.5):
                out = locus_comparison(kind, n, m, 0.01)
                locus = max(locus, abs(out["gap"] - out["predicted_gap"]))
    checks = {"influence formulas": (worst <= 1e-10, f"{worst:.1e}"),
              "locus identities": (locus <= 1e-10, f"{locus:.1e}")}
    assert report(5, checks)


@functools.lru_cache(maxsize=None)
def _ordering_checks():
    t0 = time.perf_counter()
    small = {r["network"]: r for r in compare_networks(5, 1e-6)}
    large = {r["network"]: r for r in compare_networks(200, 1e-6)}
    six = {r["network"]: r for r in compare_networks(6, 1e-6)}["star"]
    dt = time.perf_counter() - t0
    ds, dl = ({k: v["delta_hat"] for k, v in t.items()} for t in (small, large))
    ratio = six["m0_star"] / six["m_star"] * 5
    return {
        "n=5 d<c<s": (ds["directed_circle"] < ds["complete"] < ds["star"],
                      "d={directed_circle:.3g} c={complete:.3g} s={star:.3g}".format(**ds)),
        "n=200 c<d<s": (dl["complete"] < dl["directed_circle"] < dl["star"],
                        "c={complete:.3g} d={directed_circle:.3g} s={star:.3g}".format(**dl)),
        "n=6 m0*/m* vs 1/(n-1)": (abs(ratio - 1) <= 0.15, f"ratio {ratio:.3f}"),
        "runtime": (dt < 60, f"{dt:.1f}s"),
    }


@pytest.mark.xfail(strict=True, reason="n=200 is below the large-n regime: the directed "
                   "circle still has the smaller excess variance there")
def test_criterion_06_network_ordering(report):
    assert report(6, _ordering_checks())


def test_criterion_06_attainable_parts():
    checks = _ordering_checks()
    for key in ("n=5 d<c<s", "n=6 m0*/m* vs 1/(n-1)", "runtime"):
        assert checks[key][0], (key, checks[key][1])


def test_criterion_07_rule_properties(report):
    checks = {}
    bound_ok = True
    for net in (TWO, make_complete(4), make_star(5), make_directed_circle(5)):
        for varpi in (1e-3, 1e-2, 0.1):
            eq = nash_solve(net, NoiseSpec(varpi))
            bound_ok &= bool(np.all(eq.m_star >= varpi / (1 + varpi) - 1e-12))
    checks["m* >= varpi/(1+varpi)"] = (bound_ok, "4 networks x 3 varpi")
    for corr in ("independent", "perfectly_correlated"):
        varpi = 0.05
        noise = NoiseSpec(varpi, correlation=corr)
        lower = varpi / (1 + varpi)
        ok = True
        net = make_complete(3)
        for o1 in (0.01, 0.2, 0.9):
            for o2 in (0.02, 0.5):
                at_floor = player_loss(net, [lower, o1, o2], 0, noise)
                for mi in np.linspace(1e-3, 0.99 * lower, 8):
                    ok &= at_floor < player_loss(net, [mi, o1, o2], 0, noise)
        checks[f"dominance {corr}"] = (ok, "grid")
    a = result3_quantities(make_complete(4), 1e-6)
    b = result3_quantities(make_complete(4), 1e-9)
    for key in ("m_star", "omega_hat", "loss_gap"):
        r = (a[key] / 1e-2) / (b[key] / 1e-3)
        checks[f"ratio {key}"] = (abs(r - 1) <= 0.25, f"{r:.4f}")
    for name, net in (("two", TWO), ("complete4", make_complete(4))):
        noise = NoiseSpec(1e-3)
        eq = nash_solve(net, noise, classes=[list(range(net.n))])
        grad = welfare_gradient(net, eq.m_star, noise)
        checks[f"welfare gradient {name}"] = (bool(np.all(grad < 0)), f"max {grad.max():.2e}")
    assert report(7, checks)


VARPI0 = 1e-4
M_GRID = np.linspace(0.02, 0.1, 9)


@functools.lru_cache(maxsize=None)
def _polarization_checks():
    checks = {}
    prod = np.array([polarization_D(m, VARPI0) * polarization_d(m, 0.0) for m in M_GRID])
    dev = np.abs(prod / (4 * VARPI0) - 1)
    bad = M_GRID[dev > 0.10]
    checks["D*d ~ 4varpi0"] = (dev.max() <= 0.10,
                               f"max dev {dev.max():.3f}; fails for m in "
                               f"{np.round(bad, 3).tolist()}")
    lead = np.array([polarization_D_leading(m, VARPI0) * polarization_d(m, 0.0) for m in M_GRID])
    checks["leading-order D*d"] = (np.max(np.abs(lead / (4 * VARPI0) - 1)) <= 0.10,
                                  "D = 2 varpi0/m^2")
    for varpi in (0.0, VARPI0):
        m = polarization_optimum(varpi, VARPI0)
        r = polarization_D(m, VARPI0) / polarization_d(m, varpi)
        checks[f"D/d at optimum (varpi={varpi:g})"] = (abs(r - 1) < 0.15,
                                                       f"m={m:.4f}, D/d={r:.3f}")
    m = 0.05
    mc = polarization_mc(500, m, VARPI0, VARPI0, replicas=10_000, seed=8)
    d = polarization_d(m, VARPI0)
    z = (mc["d"] - d) / mc["d_se"]
    checks["Monte Carlo d"] = (abs(z) <= 3, f"z={z:.2f}")
    return checks


@pytest.mark.xfail(strict=True, reason="with the exact (1-m)^2 factor in D, D*d = "
                   "4 varpi0 (1-m)^2 leaves the 10% band for m > 0.051")
def test_criterion_08_polarization(report):
    assert report(8, _polarization_checks())


def test_criterion_08_attainable_parts():
    checks = _polarization_checks()
    for key, (ok, detail) in checks.items():
        if key != "D*d ~ 4varpi0":
            assert ok, (key, detail)


def _eta_covariance_z(net, rules, nu, seed):
    n = net.n
    w = covariance_limit(net, rules, NoiseSpec(idiosyncratic_variance=nu)).w
    r = Realization(0.0, np.zeros(n), np.zeros(n), nu, seed)
    eta = run(net, rules, r, max_T=100_000, record_every=1, tol=0.0, detect_drift=False).ys[1000:]
    prod = np.einsum("ti,tj->tij", eta, eta).reshape(len(eta), -1)
    b = 50
    size = len(prod) // b
    means = prod[: b * size].reshape(b, size, -1).mean(axis=1)
    se = means.std(axis=0, ddof=1) / np.sqrt(b)
    return np.max(np.abs(means.mean(axis=0) - w.ravel()) / se)


def test_criterion_09_idiosyncratic_covariance(report):
    checks = {}
    cases = {"two-player": (TWO, RuleProfile(np.array([0.5, 0.5]), np.array([1.0, 1.0]))),
             "star n=4": (make_star(4), RuleProfile(np.array([0.3, 0.5, 0.2, 0.4]),
                                                    np.array([0.8, 0.6, 1.0, 0.5])))}
    for name, (net, rules) in cases.items():
        nu = 0.01
        w = covariance_limit(net, rules, NoiseSpec(idiosyncratic_variance=nu)).w
        B = noise_propagator(net, rules)
        lam = np.diag((rules.gamma * (1 - rules.m)) ** 2 * nu)
        fp = float(np.max(np.abs(lam + B @ w @ B.T - w)))
        checks[f"fixed point {name}"] = (fp <= 1e-10, f"{fp:.1e}")
        z = _eta_covariance_z(net, rules, nu, seed=3)
        checks[f"Monte Carlo {name}"] = (z <= 5, f"max z={z:.2f}")
        c = covariance_limit(net, rules, NoiseSpec(idiosyncratic_variance=nu)).V
        worst = 0.0
        for s in (1.0, 0.5, 0.25, 0.125):
            scaled = RuleProfile(rules.m, rules.gamma * s)
            V = covariance_limit(net, scaled, NoiseSpec(idiosyncratic_variance=nu)).V
            worst = max(worst, float(np.max(V / (c * s))))
        checks[f"V(s gamma) <= c s {name}"] = (worst <= 1 + 1e-12, f"max V/(cs)={worst:.3f}")
    assert report(9, checks)


def test_criterion_10_coarse_model(report):
    model = CoarseModel()
    checks = {}
    eq = coarse_equilibrium(model, 1e-4)
    checks["closed form"] = (eq.m_star == 1e-4 ** (1 / 3), f"m*={eq.m_star:.6f}")
    r = eq.m_star / eq.m_star_numeric
    checks["numeric equilibrium"] = (abs(r - 1) <= 0.15,
                                     f"numeric={eq.m_star_numeric:.4f}, ratio {r:.3f}")
    rng = np.random.default_rng(10)
    ok = True
    for _ in range(20):
        theta, xi = rng.normal(), rng.normal(scale=0.1)
        out = coarse_longrun(model, theta, 0.0, xi)
        f_end = share_path(model, theta, 0.0, xi, T=int(12 / abs(xi)) + 10)[-1]
        expect = 1 if xi > 0 else 0
        ok &= out.unanimous_action == expect
        ok &= f_end < 1e-6 if xi > 0 else f_end > 1 - 1e-6
    checks["m=0 unanimity"] = (ok, "20 seeded runs")
    worst = 0.0
    for theta, m, xi in ((0.3, 0.2, 0.05), (-0.5, 0.5, -0.1)):
        vals = [simulate_agents(model, theta, m, xi, n_agents=10_000, seed=s)[0]
                for s in range(20)]
        se = np.std(vals, ddof=1) / np.sqrt(len(vals))
        worst = max(worst, abs(np.mean(vals) - coarse_longrun(model, theta, m, xi).y_limit) / se)
    checks["agent oracle"] = (worst <= 3, f"max z={worst:.2f}")
    assert report(10, checks)


def test_criterion_11_protocol_invariance(report):
    rng = np.random.default_rng(11)
    worst = 0.0
    for s in range(20):
        net, m, g = random_instance(rng)
        r = Realization(0.0, rng.normal(size=net.n), rng.normal(size=net.n), 0.0, 0)
        protos = [Protocol.synchronous()] + [random_covering_protocol(net, K, seed=100 * s + K)
                                             for K in (2, 3, 5)]
        rep = protocol_invariance_check(net, RuleProfile(m, g), r, protos, tol=1e-13)
        worst = max(worst, rep["max_gap"])
    g1, g2 = 0.3, 0.5
    rules = RuleProfile(np.zeros(2), np.array([g1, g2]))
    r = Realization(0.0, np.array([1.0, -0.5]), np.zeros(2), 0.0, 0)
    proto = every_kth_update_protocol(2, 1, 3)
    y3 = run(TWO, rules, r, proto, max_T=3, tol=0.0).y_final
    y6 = run(TWO, rules, r, proto, max_T=6, tol=0.0).y_final
    g2_eff = g2 * (1 - g1) ** 2
    g1_eff = 1 - (1 - g1) ** 3
    M = np.array([[1 - g1_eff, g1_eff], [g2_eff, 1 - g2_eff]])
    step_gap = float(np.max(np.abs(M @ y3 - y6)))
    limit = run(TWO, rules, r, proto, tol=1e-14).y_final
    pi = np.array([g2_eff, g1_eff]) / (g1_eff + g2_eff)
    limit_gap = float(np.max(np.abs(limit - pi @ y3)))
    checks = {"FJ schedules": (worst <= 1e-7, f"max gap {worst:.1e}"),
              "gamma2' three-period map": (step_gap <= 1e-8, f"{step_gap:.1e}"),
              "DG limit from gamma2'": (limit_gap <= 1e-8, f"{limit_gap:.1e}")}
    assert report(11, checks)
