import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from opinionlab import closed_forms as cf
from opinionlab.exceptions import NoConvergence
from opinionlab.game import (best_response, best_response_curve, compare_networks,
                             finite_star_D, nash_solve, own_loss_gradient, player_loss,
                             polarization_mc, polarization_optimum, polarization_study,
                             precision_scaled_gamma_check, social_optimum, symmetry_classes,
                             welfare_gradient)
from opinionlab.net import make_complete, make_directed_circle, make_star
from opinionlab.loss import analytic_loss
from opinionlab.rules import NoiseSpec, RuleProfile, SignalModel

TWO = make_complete(2)


@pytest.mark.parametrize("mj", [0.05, 0.3, 0.9])
@pytest.mark.parametrize("varpi", [1e-3, 0.05])
def test_two_player_best_response_closed_form(mj, varpi):
    br = best_response(TWO, [0.5, mj], NoiseSpec(varpi), i=0)
    assert br == pytest.approx(cf.two_player_best_response(mj, varpi), rel=1e-12)


def test_best_response_minimizes_own_loss():
    net = make_star(4)
    noise = NoiseSpec(0.02)
    m = np.array([0.3, 0.2, 0.5, 0.1])
    for i in range(4):
        def f(v):
            mm = m.copy()
            mm[i] = v
            return player_loss(net, mm, i, noise)
        r = minimize_scalar(f, bounds=(1e-6, 1), method="bounded", options={"xatol": 1e-10})
        assert best_response(net, m, noise, i=i) == pytest.approx(r.x, abs=1e-6)


def test_best_response_when_others_degroot():
    assert best_response(TWO, [0.5, 0.0], NoiseSpec(0.01)) == 1.0
    assert best_response(TWO, [0.5, 0.0], NoiseSpec()) == 0.0


def test_best_response_with_idiosyncratic_noise():
    noise = NoiseSpec(0.01, idiosyncratic_variance=0.05)
    m = np.array([0.5, 0.3])
    br = best_response(TWO, m, noise, i=0)
    vals = [player_loss(TWO, [v, 0.3], 0, noise) for v in (br - 1e-3, br, br + 1e-3)]
    assert vals[1] <= min(vals[0], vals[2])


def test_best_response_curve_shape():
    grid, br = best_response_curve(TWO, NoiseSpec(0.01), grid=[0.1, 0.5, 0.9])
    assert grid.shape == br.shape == (3,)


@pytest.mark.parametrize("varpi", [1e-2, 1e-3, 1e-4])
def test_two_player_nash_matches_scalar_root(varpi):
    eq = nash_solve(TWO, NoiseSpec(varpi))
    assert np.max(np.abs(eq.m_star - cf.two_player_nash(varpi))) < 1e-9
    assert np.all(np.abs(own_loss_gradient(TWO, eq.m_star, NoiseSpec(varpi))) < 1e-5)


def test_nash_on_asymmetric_network():
    net = make_star(4)
    noise = NoiseSpec(0.01)
    eq = nash_solve(net, noise)
    assert eq.residual < 1e-9
    br = np.array([best_response(net, eq.m_star, noise, i=i) for i in range(4)])
    np.testing.assert_allclose(br, eq.m_star, atol=1e-9)
    sym = nash_solve(net, noise, classes=symmetry_classes(net, "star"))
    np.testing.assert_allclose(sym.m_star, eq.m_star, atol=1e-8)


def test_nash_nonconvergence_raises():
    with pytest.raises(NoConvergence) as e:
        nash_solve(make_star(4), NoiseSpec(0.01), max_iter=2, polish=False)
    assert e.value.trace


def test_noise_free_nash_is_degroot_boundary():
    net = make_star(5)
    s2 = np.array([1.0, 2.0, 1.0, 0.5, 1.0])
    eq = nash_solve(net, NoiseSpec(), SignalModel(sigma_sq=s2))
    assert np.all(eq.m_star == 0)
    assert eq.losses.L[0] == pytest.approx(eq.losses.v_star, rel=1e-10)


@pytest.mark.parametrize("correlation", ["independent", "perfectly_correlated"])
def test_dominated_low_weights(correlation):
    varpi = 0.05
    noise = NoiseSpec(varpi, correlation=correlation)
    lower = varpi / (1 + varpi)
    net = make_complete(3)
    for others in ([0.01, 0.01], [0.2, 0.6], [0.9, 0.05]):
        for mi in np.linspace(0.002, lower * 0.99, 6):
            low = player_loss(net, [mi] + others, 0, noise)
            floor = player_loss(net, [lower] + others, 0, noise)
            assert floor < low


def test_equilibrium_above_lower_bound():
    for net in (TWO, make_complete(4), make_star(5), make_directed_circle(5)):
        for varpi in (1e-3, 0.1):
            eq = nash_solve(net, NoiseSpec(varpi))
            assert np.all(eq.m_star >= varpi / (1 + varpi) - 1e-12)


@pytest.mark.parametrize("net", [TWO, make_complete(4)], ids=["two", "complete4"])
def test_welfare_gradient_negative_at_nash(net):
    noise = NoiseSpec(1e-3)
    eq = nash_solve(net, noise, classes=[list(range(net.n))])
    assert np.all(welfare_gradient(net, eq.m_star, noise) < 0)


def test_social_optimum_two_player():
    so = social_optimum(TWO, NoiseSpec(1e-3), symmetric_hint=True)
    assert so.m[0] == pytest.approx(0.2171, abs=1e-3)
    eq = nash_solve(TWO, NoiseSpec(1e-3))
    assert so.m[0] > eq.m_star[0]
    assert so.total_loss < np.sum(eq.losses.L)


def test_social_optimum_multistart_matches_symmetric():
    noise = NoiseSpec(1e-2)
    a = social_optimum(make_complete(3), noise, symmetric_hint=True)
    b = social_optimum(make_complete(3), noise, starts=3)
    assert b.total_loss == pytest.approx(a.total_loss, rel=1e-6)


def test_compare_networks_small():
    rows = {r["network"]: r for r in compare_networks(5, 1e-6)}
    assert rows["directed_circle"]["delta_hat"] < rows["complete"]["delta_hat"] \
        < rows["star"]["delta_hat"]
    for r in rows.values():
        assert abs(r["h_closed_form_gap"]) < 1e-10
    six = {r["network"]: r for r in compare_networks(6, 1e-6)}["star"]
    assert six["m0_star"] / six["m_star"] == pytest.approx(1 / 5, rel=0.15)


def test_precision_scaled_gamma_is_efficient(rng):
    net = make_star(5)
    out = precision_scaled_gamma_check(net, rng.uniform(0.5, 2.0, size=(5, 5)))
    for row in out:
        np.testing.assert_allclose(row["pi"], row["pi_star"], atol=1e-10)
        assert abs(row["variance_gap"]) < 1e-12


def test_polarization_study_and_optimum():
    reps = polarization_study(50, [0.02, 0.05], 1e-4, 1e-4)
    for r in reps:
        assert r.D == pytest.approx(cf.polarization_D(r.m, 1e-4))
        assert r.D_leading > r.D
        assert r.D_finite > 0
    ben = polarization_study(20, [0.05], 1e-4, 1e-4, hub_mode="benevolent")[0]
    assert ben.m0 > 0
    m = polarization_optimum(1e-4, 1e-4)
    assert 0 < m < 1


def test_finite_star_D_approaches_large_star_limit():
    m = 0.05
    big = finite_star_D(2000, m, 1e-4, 1e-4)
    assert big == pytest.approx(cf.polarization_D(m, 1e-4) + 2 * (1 / 2000), rel=0.2)


def test_polarization_mc_reproducible():
    a = polarization_mc(30, 0.05, 1e-4, 1e-4, replicas=2000, seed=1)
    b = polarization_mc(30, 0.05, 1e-4, 1e-4, replicas=2000, seed=1)
    assert a == b


@pytest.mark.parametrize("correlation", ["independent", "perfectly_correlated"])
def test_dominance_fifty_point_grid(correlation):
    varpi = 0.02
    noise = NoiseSpec(varpi, correlation=correlation)
    lower = varpi / (1 + varpi)
    net = make_star(4)
    others = [0.3, 0.05, 0.6]
    at_floor = player_loss(net, [lower] + others, 0, noise)
    for mi in np.linspace(1e-4, lower, 50, endpoint=False):
        assert at_floor <= player_loss(net, [mi] + others, 0, noise)


def test_loss_nondecreasing_in_noise():
    rules = RuleProfile.build(3, [0.2, 0.4, 0.3], [0.5, 0.9, 0.7])
    net = make_star(3)
    by_nu = [analytic_loss(net, rules, NoiseSpec(0.01, idiosyncratic_variance=v)).L
             for v in (0.0, 0.01, 0.1)]
    assert np.all(np.diff(by_nu, axis=0) >= 0)


def test_social_over_nash_ratio_grows():
    ratios = []
    for varpi in (1e-2, 1e-3, 1e-4):
        m_star = nash_solve(TWO, NoiseSpec(varpi)).m_star[0]
        m_ss = social_optimum(TWO, NoiseSpec(varpi), symmetric_hint=True).m[0]
        assert m_ss > m_star
        ratios.append(m_ss / m_star)
    assert np.all(np.diff(ratios) > 0)


def test_best_response_curves_cross_at_nash():
    m_star = cf.two_player_nash(0.01)
    grid, br = best_response_curve(TWO, NoiseSpec(0.01), grid=[m_star])
    assert br[0] == pytest.approx(m_star, abs=1e-12)
