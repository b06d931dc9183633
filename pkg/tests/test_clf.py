import numpy as np
import pytest

from nsstab.boxopt import BoxProblem, minimize
from nsstab.clf import (artstein_context, artstein_family, artstein_v, backstep_control,
                        backstep_terms, composite_minimize, endi_context, get_clf, get_family,
                        kappa_artstein, kappa_c_artstein, kappa_c_endi, ni_family,
                        ni_family_closed_form, s_value, sontag_kappa_ni, v1_ni, v2_ni, vc_artstein,
                        vc_endi)
from nsstab.errors import ConfigError, GuardedDomainError
from nsstab.systems import make_endi, make_ni

GRID = np.linspace(0, 2 * np.pi, 720)


def _grid_min(fam, x):
    X = np.tile(x, (len(GRID), 1))
    return fam.F(X, GRID[:, None]).min()


def test_v1_v2_examples():
    assert v1_ni([1, 0, 0]) == 1 and v2_ni([1, 0, 0]) == 1
    assert v1_ni(np.zeros(3)) == 0 == v2_ni(np.zeros(3))
    assert v1_ni([0, 0, 1]) == 2 and v2_ni([0, 0, 1]) == 12


def test_ni_family_examples():
    fam = ni_family()
    TH = GRID[:, None]
    assert np.allclose(fam.F(np.tile([1.0, 0, 0], (720, 1)), TH), 1.0)
    assert np.allclose(fam.F(np.tile([0.0, 0, 1], (720, 1)), TH), 1.0)
    assert fam.value(np.zeros(3)) == 0
    assert fam.value([0, 0, 1.0]) == pytest.approx(1.0)


def test_artstein_examples():
    assert artstein_v([1, 0]) == pytest.approx(np.sqrt(3) - 1)
    assert artstein_v([0, 0]) == 0
    assert artstein_family().value([1.0, 0]) == pytest.approx(np.sqrt(3) - 1, abs=1e-9)


@pytest.mark.parametrize("V", [v1_ni, v2_ni, ni_family_closed_form])
def test_positive_definite_and_growth_ni(V):
    rng = np.random.default_rng(42)
    X = rng.normal(size=(1000, 3))
    assert np.all(V(X) > 0)
    shell = 10 * X / np.linalg.norm(X, axis=1, keepdims=True)
    assert np.all(V(shell) > 10)


def test_ni_marginal_value_on_shell():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 3))
    shell = 10 * X / np.linalg.norm(X, axis=1, keepdims=True)
    vals = ni_family().values(shell)
    assert np.all(vals > 10)


def test_artstein_positive_and_proper():
    rng = np.random.default_rng(42)
    X = rng.normal(size=(1000, 2))
    assert np.all(artstein_v(X) > 0)
    ang = np.linspace(0, 2 * np.pi, 1000)
    for rad in (1.0, 10.0, 100.0):
        shell = rad * np.stack([np.cos(ang), np.sin(ang)], -1)
        # exact minimum on the shell is rad*(sqrt3 - 1), attained on the x1 axis
        assert np.all(artstein_v(shell) >= rad * (np.sqrt(3) - 1) - 1e-9)


def test_ni_family_matches_closed_form():
    rng = np.random.default_rng(5)
    X = rng.uniform(-2, 2, (100, 3))
    assert np.max(np.abs(ni_family().values(X) - ni_family_closed_form(X))) <= 1e-9


@pytest.mark.parametrize("fam_factory,dim", [(ni_family, 3), (artstein_family, 2)])
def test_marginal_consistency_against_grid(fam_factory, dim):
    fam = fam_factory()
    rng = np.random.default_rng(42)
    X = rng.uniform(-2, 2, (100, dim))
    V = fam.values(X)
    G = np.array([_grid_min(fam, x) for x in X])
    # boxopt may only improve on the grid, and must not lose more than 2x accuracy
    assert np.all(V <= G + 2 * fam.theta_accuracy)


def test_artstein_family_equals_v():
    rng = np.random.default_rng(3)
    X = rng.uniform(-2, 2, (100, 2))
    assert np.max(np.abs(artstein_family().values(X) - artstein_v(X))) <= 1e-9


@pytest.mark.parametrize("fam_factory,dim", [(ni_family, 3), (artstein_family, 2)])
def test_gradient_matches_central_differences(fam_factory, dim):
    fam = fam_factory()
    rng = np.random.default_rng(42)
    h = 1e-6
    for _ in range(50):
        x = rng.uniform(-1.5, 1.5, dim)
        th = rng.uniform(0, 2 * np.pi, (1, 1))
        if fam.denominator is not None and abs(fam.denominator(x[None], th)[0]) < 0.2:
            continue
        g = fam.dFdx(x[None], th)[0]
        fd = np.array([(fam.F((x + h * e)[None], th)[0] - fam.F((x - h * e)[None], th)[0]) / (2 * h)
                       for e in np.eye(dim)])
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-5 * max(1.0, np.max(np.abs(fd))))


def test_sontag_kappa_examples():
    ctx = endi_context()
    k = sontag_kappa_ni(ctx, [1.0, 0, 0], 0.3)
    assert np.allclose(k, [-4, 0])
    zeta = np.array([4.0, 0, 0])
    xdot = make_ni()([1.0, 0, 0], k)
    assert zeta @ xdot == pytest.approx(-16)
    assert np.allclose(sontag_kappa_ni(ctx, np.zeros(3), 0.0), 0)


def test_sontag_kappa_guard():
    ctx = endi_context(singular_guard=1e-3)
    # den = x1 cos + x2 sin + sqrt|x3| = -1 + 1 = 0 at theta = 0
    with pytest.raises(GuardedDomainError):
        sontag_kappa_ni(ctx, [-1.0, 0, 1.0], 0.0)


def test_ni_decay_theta():
    ctx = endi_context()
    fam, ni = ni_family(), make_ni()
    rng = np.random.default_rng(42)
    for x in rng.uniform(-1, 1, (30, 3)):
        th, _ = fam.minimize_theta(x[None])
        zeta = fam.dFdx(x[None], th)[0]
        k = sontag_kappa_ni(ctx, x, th[0])
        assert zeta @ ni(x, k) <= 0


def test_vc_endi_examples():
    ctx = endi_context()
    v0, _ = vc_endi(ctx, np.zeros(3), np.zeros(2))
    assert v0 == 0
    x = np.array([0.6, -0.3, 0.4])
    th, vals = ni_family().minimize_theta(x[None])
    eta = sontag_kappa_ni(ctx, x, th[0])
    v, thc = vc_endi(ctx, x, eta)
    assert v == pytest.approx(vals[0], abs=1e-8)
    assert thc[0] == pytest.approx(th[0, 0], abs=1e-3)


def test_vc_endi_axis_point_matches_grid():
    ctx = endi_context()
    x = np.array([1.0, 0, 0])
    K = np.array([sontag_kappa_ni(ctx, x, t) for t in GRID])
    oracle = np.min(1 + 0.5 * np.sum(K**2, axis=1))
    v, _ = vc_endi(ctx, x, np.zeros(2))
    assert v <= oracle + 1e-9
    assert v == pytest.approx(oracle, abs=1e-6)


def test_kappa_c_endi_origin_and_case1():
    ctx = endi_context()
    assert np.allclose(kappa_c_endi(ctx, np.zeros(3), np.zeros(2)), 0)
    x = np.array([0.5, 0.4, -0.3])
    th, _ = ni_family().minimize_theta(x[None])
    eta = sontag_kappa_ni(ctx, x, th[0])
    xe = np.concatenate([x, eta])
    t = backstep_terms(ctx, xe, th[0])
    assert np.allclose(t["z"], 0)
    u = backstep_control(ctx, xe, th[0])
    assert np.allclose(u, t["J"] @ (t["G"] @ eta) - t["G"].T @ t["zeta"])
    S = s_value(ctx, xe, th[0], u)
    assert S == pytest.approx(t["zeta"] @ (t["G"] @ t["kappa"]), abs=1e-9)
    assert S < 0


def test_endi_decay_identity_and_sign():
    ctx = endi_context()
    endi = make_endi()
    rng = np.random.default_rng(42)
    neg = 0
    for _ in range(20):
        xe = rng.uniform(-1, 1, 5)
        xe *= rng.uniform(0.2, 2) / np.linalg.norm(xe)
        _, th = composite_minimize(ctx, xe)
        u = backstep_control(ctx, xe, th)
        t = backstep_terms(ctx, xe, th)
        S = s_value(ctx, xe, th, u)
        assert S == pytest.approx(t["zeta"] @ (t["G"] @ t["kappa"]) - t["z"] @ t["z"], abs=1e-6)
        # directional derivative of the frozen-theta composite along f_ENDI
        fam = ctx.composite()
        grad = fam.dFdx(xe[None], th[None])[0]
        assert grad @ endi(xe, u) == pytest.approx(S, abs=1e-3 * max(1, abs(S)))
        neg += S < 0
    assert neg == 20


def test_artstein_kappa_and_decay():
    ctx = artstein_context()
    fam = artstein_family()
    from nsstab.systems import artstein_g
    rng = np.random.default_rng(42)
    for _ in range(20):
        v = rng.uniform(-1, 1, 2)
        th = rng.uniform(0, 2 * np.pi)
        zeta = fam.dFdx(v[None], np.array([[th]]))[0]
        g = artstein_g(v)
        k = kappa_artstein(ctx, v, th)
        assert k == pytest.approx(-(zeta @ g))
        assert zeta @ (g * k) <= 0
    assert kappa_c_artstein(ctx, [0.0, 0.0], 0.7) == pytest.approx(-0.7)


def test_artstein_composite_decay():
    ctx = artstein_context()
    rng = np.random.default_rng(42)
    for _ in range(20):
        xe = rng.uniform(-1, 1, 3)
        _, th = vc_artstein(ctx, xe[:2], xe[2:])
        u = backstep_control(ctx, xe, th)
        t = backstep_terms(ctx, xe, th)
        S = s_value(ctx, xe, th, u)
        assert S == pytest.approx(t["zeta"] @ (t["G"] @ t["kappa"]) - t["z"] @ t["z"], abs=1e-6)
        assert S < 0


def test_context_validation():
    with pytest.raises(ValueError):
        endi_context(K=0)
    with pytest.raises(ValueError):
        endi_context(fd_step=1e-2)


def test_simplified_mode():
    ctx = endi_context(simplified=True)
    xe = np.array([0.3, 0.2, 0.1, 0.5, -0.5])
    _, th = composite_minimize(ctx, xe)
    assert np.allclose(backstep_control(ctx, xe, th), -backstep_terms(ctx, xe, th)["z"])


def test_registry():
    for label in ("v1_ni", "v2_ni", "ni_family", "artstein_v", "artstein_family"):
        V = get_clf(label)
        assert V(np.zeros(V.dim)) == 0
    assert get_family("v1_ni") is None
    assert get_family("vc_artstein").dim == 3
    with pytest.raises(ConfigError):
        get_clf("nope")


def test_theta_minimizer_is_boxopt_consistent():
    fam = ni_family()
    x = np.array([0.2, -0.7, 0.3])
    res = minimize(BoxProblem(lambda T: fam.F(np.tile(x, (len(T), 1)), T), [[0, 2 * np.pi]],
                              1e-12, vectorized=True))
    assert fam.value(x) <= res.value + 1e-12
