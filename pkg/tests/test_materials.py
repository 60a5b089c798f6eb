"""Constitutive-level tests: frozen values, finite-difference oracles,
return-mapping optimality against a grid search."""

import numpy as np
import pytest

from lipfield.errors import ConvexityError
from lipfield.materials import (
    D_MAX,
    H1,
    H2,
    Duals,
    PointState,
    SofteningElasticity,
    SofteningElastoHardeningPlasticity,
    SofteningPlasticity,
    duals,
    kkt_check,
    lambda_from_toughness,
    potential_density,
    return_map,
    softening_h,
)


def central_diff(f, x, delta):
    return (f(x + delta) - f(x - delta)) / (2.0 * delta)


# ---------------------------------------------------------------------------
# Softening functions
# ---------------------------------------------------------------------------


def test_h1_values():
    v, dv = softening_h(H1(), 0.0)
    assert v == 0.0
    assert dv == 2.0
    v, dv = softening_h(H1(), 0.5)
    assert v == pytest.approx(1.75)
    assert dv == pytest.approx(5.0)


def test_h2_value_and_fd_derivative():
    law = H2(lam=0.3)
    v, dv = softening_h(law, 0.5)
    assert v == pytest.approx(0.75 / 0.575**2, rel=1e-12)
    fd = central_diff(lambda d: float(law.value(d)), 0.5, 1e-7)
    assert dv == pytest.approx(fd, rel=1e-7)


def test_h2_at_full_damage():
    for lam in (0.1, 0.3, 0.5):
        v, _ = softening_h(H2(lam=lam), 1.0)
        assert v == pytest.approx(1.0 / lam**2, rel=1e-12)


def test_h_slope_two_at_origin():
    for law in (H1(), H2(lam=0.2), H2(lam=0.5)):
        _, dv = softening_h(law, 0.0)
        assert dv == pytest.approx(2.0, abs=1e-12)


def test_h_domain_error():
    with pytest.raises(ValueError):
        softening_h(H1(), 1.5)
    with pytest.raises(ValueError):
        softening_h(H2(lam=0.3), -0.1)


def test_h2_second_derivative_fd():
    rng = np.random.default_rng(3)
    for lam in (0.1, 0.3, 0.45):
        law = H2(lam=lam)
        for d in rng.uniform(0.01, 0.99, size=20):
            fd = central_diff(lambda x: float(law.deriv(x)), d, 1e-6)
            assert float(law.second(d)) == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_lambda_from_toughness():
    assert lambda_from_toughness(1.0, 0.1, 2.0 / 3.0) == pytest.approx(0.3)
    assert lambda_from_toughness(1.0, 0.5, 10.0 / 3.0) == pytest.approx(0.3)
    assert lambda_from_toughness(1.0, 0.25, 1.0) == pytest.approx(0.5)  # boundary
    with pytest.raises(ConvexityError):
        lambda_from_toughness(1.0, 0.3, 1.0)
    with pytest.raises(ValueError):
        lambda_from_toughness(-1.0, 0.1, 1.0)


def test_h2_convex_when_built_from_toughness():
    # Figure-level parameter combinations keep lam <= 1/3 where h2 is convex.
    combos = [(1.0, 0.1, 2.0 / 3.0), (1.0, 0.5, 10.0 / 3.0), (1.0, 0.5, 3.0),
              (1.0, 0.1, 2.0), (1.0, 0.2, 2.0)]
    d = np.linspace(0.0, 1.0, 401)
    for Y_c, l, G_c in combos:
        lam = lambda_from_toughness(Y_c, l, G_c)
        vals = np.asarray(H2(lam=lam).value(d))
        slopes = np.diff(vals) / np.diff(d)
        assert np.all(np.diff(slopes) >= -1e-8), f"h2 not convex for lam={lam}"


# ---------------------------------------------------------------------------
# Potential densities and duals (frozen examples)
# ---------------------------------------------------------------------------


def test_fse_at_onset_strain():
    model = SofteningElasticity(E=1.0, Y_c=1.0, softening=H1())
    eps_c = np.sqrt(2.0)
    assert potential_density(model, PointState(eps=eps_c)) == pytest.approx(1.0)


def test_fse_zero_strain_half_damage():
    model = SofteningElasticity(E=1.0, Y_c=1.0, softening=H1())
    assert potential_density(model, PointState(eps=0.0, d=0.5)) == pytest.approx(1.75)


def test_fsp_example():
    model = SofteningPlasticity(E=1.0, sigma_y=1.0 / 16.0, k=4.0)
    state = PointState(eps=0.2, eps_p=0.2, p=0.2, d=0.0)
    assert potential_density(model, state) == pytest.approx(0.0175)


def test_duals_softening_elasticity_onset():
    model = SofteningElasticity(E=1.0, Y_c=1.0, softening=H1())
    out = duals(model, PointState(eps=np.sqrt(2.0)))
    assert out.sigma == pytest.approx(np.sqrt(2.0))
    assert out.mu == pytest.approx(0.0, abs=1e-14)
    assert out.R is None


def test_duals_softening_plasticity_trivial():
    model = SofteningPlasticity(E=1.0, sigma_y=1.0 / 16.0, k=4.0)
    out = duals(model, PointState(eps=0.3, eps_p=0.3, p=0.0, d=0.0))
    assert out.mu == pytest.approx(0.0)
    assert out.sigma == pytest.approx(0.0)
    assert out.R == pytest.approx(1.0 / 16.0)


def test_duals_combined_model():
    model = SofteningElastoHardeningPlasticity(
        E=2.0, Y_c=1.0, sigma_y=1.0, k=1.0, softening=H1()
    )
    out = duals(model, PointState(eps=2.0, eps_p=1.0, p=1.0, d=0.0))
    assert out.sigma == pytest.approx(2.0)
    assert out.R == pytest.approx(2.0)
    assert out.mu == pytest.approx(-3.0)


def test_elastic_model_rejects_plastic_state():
    model = SofteningElasticity(E=1.0, Y_c=1.0)
    with pytest.raises(ValueError):
        potential_density(model, PointState(eps=0.1, eps_p=0.1, p=0.1))


# ---------------------------------------------------------------------------
# Return mapping (frozen examples)
# ---------------------------------------------------------------------------


def test_return_map_combined_model():
    model = SofteningElastoHardeningPlasticity(
        E=2.0, Y_c=1.0, sigma_y=1.0, k=1.0, softening=H1()
    )
    rm = return_map(model, eps=2.0, eps_p_n=0.0, p_n=0.0, d=0.0)
    assert rm.plastic
    assert rm.p == pytest.approx(1.0)
    assert rm.eps_p == pytest.approx(1.0)
    assert rm.sigma == pytest.approx(2.0)
    assert rm.T == pytest.approx(2.0 / 3.0)
    # plastic consistency |sigma| = R
    R = model.sigma_y * (1.0 + model.k * rm.p)
    assert abs(rm.sigma) == pytest.approx(R)


def test_return_map_softening_plasticity():
    model = SofteningPlasticity(E=1.0, sigma_y=1.0 / 16.0, k=4.0)
    rm = return_map(model, eps=0.5, eps_p_n=0.0, p_n=0.0, d=0.5)
    assert rm.plastic
    assert rm.p == pytest.approx(0.484375 / 1.0625, rel=1e-12)
    assert rm.sigma == pytest.approx(3.0 / 68.0, rel=1e-12)
    assert rm.T == pytest.approx(1.0 / 17.0, rel=1e-12)
    R = float(model.yield_R(rm.p, 0.5))
    assert abs(rm.sigma) == pytest.approx(R, rel=1e-12)


def test_return_map_elastic_branch():
    model = SofteningPlasticity(E=1.0, sigma_y=1.0 / 16.0, k=4.0)
    rm = return_map(model, eps=0.01, eps_p_n=0.0, p_n=0.0, d=0.0)
    assert not rm.plastic
    assert rm.eps_p == 0.0
    assert rm.p == 0.0
    assert rm.sigma == pytest.approx(0.01)
    assert rm.T == pytest.approx(1.0)


def test_return_map_negative_trial():
    for model in (
        SofteningPlasticity(E=1.0, sigma_y=0.5, k=1.0),
        SofteningElastoHardeningPlasticity(E=1.0, Y_c=1.0, sigma_y=0.5, k=1.0),
    ):
        rm = return_map(model, eps=-1.0, eps_p_n=0.0, p_n=0.0, d=0.0)
        assert rm.plastic
        assert rm.eps_p == pytest.approx(-1.0 / 3.0)
        assert rm.sigma == pytest.approx(-2.0 / 3.0)


def test_return_map_pure_elastic_model():
    model = SofteningElasticity(E=2.0, Y_c=1.0)
    rm = return_map(model, eps=0.7, eps_p_n=0.0, p_n=0.0, d=0.5)
    assert not rm.plastic
    assert rm.sigma == pytest.approx(0.25 * 2.0 * 0.7)
    assert rm.T == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# Random model/state samplers
# ---------------------------------------------------------------------------


def random_law(rng, lam_max=0.5):
    if rng.random() < 0.5:
        return H1()
    return H2(lam=float(rng.uniform(0.05, lam_max)))


def random_model(rng, kind):
    E = float(rng.uniform(0.5, 3.0))
    if kind == "se":
        return SofteningElasticity(E=E, Y_c=float(rng.uniform(0.3, 2.0)),
                                   softening=random_law(rng))
    if kind == "sep":
        return SofteningElastoHardeningPlasticity(
            E=E, Y_c=float(rng.uniform(0.3, 2.0)),
            sigma_y=float(rng.uniform(0.2, 2.0)), k=float(rng.uniform(0.1, 3.0)),
            softening=random_law(rng))
    return SofteningPlasticity(E=E, sigma_y=float(rng.uniform(0.2, 2.0)),
                               k=float(rng.uniform(0.1, 3.0)))


def random_state(rng, kind):
    eps = float(rng.uniform(-3.0, 3.0))
    if kind == "se":
        return PointState(eps=eps, d=float(rng.uniform(0.0, 0.99)))
    return PointState(eps=eps, eps_p=float(rng.uniform(-1.0, 1.0)),
                      p=float(rng.uniform(0.0, 2.0)), d=float(rng.uniform(0.0, 0.99)))


KINDS = ("se", "sep", "sp")


# ---------------------------------------------------------------------------
# Finite-difference oracles for the duals and the tangent
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_duals_match_finite_differences(kind):
    rng = np.random.default_rng(11)
    for _ in range(1000):
        model = random_model(rng, kind)
        st = random_state(rng, kind)
        out = duals(model, st)
        de = 1e-6 * max(1.0, abs(st.eps))
        fd_sigma = central_diff(
            lambda e: float(model.potential(e, st.eps_p, st.p, st.d)), st.eps, de)
        assert out.sigma == pytest.approx(fd_sigma, rel=1e-6, abs=1e-8)
        dd = 1e-6
        fd_mu = central_diff(
            lambda d: float(model.potential(st.eps, st.eps_p, st.p, d)), st.d, dd)
        assert out.mu == pytest.approx(fd_mu, rel=1e-6, abs=1e-8)
        if model.has_plasticity:
            dp = 1e-6 * max(1.0, st.p)
            fd_R = central_diff(
                lambda p: float(model.potential(st.eps, st.eps_p, p, st.d)), st.p, dp)
            assert out.R == pytest.approx(fd_R, rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("kind", ("sep", "sp"))
def test_tangent_matches_finite_differences(kind):
    rng = np.random.default_rng(12)
    count = 0
    while count < 1000:
        model = random_model(rng, kind)
        eps = float(rng.uniform(-3.0, 3.0))
        eps_p_n = float(rng.uniform(-1.0, 1.0))
        p_n = float(rng.uniform(0.0, 2.0))
        d = float(rng.uniform(0.0, 0.95))
        # skip points too close to the elastic/plastic branch boundary
        s_t = model.E * (eps - eps_p_n)
        if kind == "sep":
            f_t = abs(s_t) - model.sigma_y * (1.0 + model.k * p_n)
        else:
            w = (1.0 - d) ** 2
            f_t = abs(s_t) - model.sigma_y * w * (1.0 + model.k * p_n)
        if abs(f_t) < 1e-3 * model.E:
            continue
        count += 1
        rm = return_map(model, eps, eps_p_n, p_n, d)
        de = 1e-7 * max(1.0, abs(eps))
        fd_T = central_diff(
            lambda e: return_map(model, e, eps_p_n, p_n, d).sigma, eps, de)
        assert rm.T == pytest.approx(fd_T, rel=1e-5, abs=1e-9)


def test_elastic_tangent_fd():
    rng = np.random.default_rng(13)
    for _ in range(200):
        model = random_model(rng, "se")
        eps = float(rng.uniform(-3.0, 3.0))
        d = float(rng.uniform(0.0, 0.95))
        rm = return_map(model, eps, 0.0, 0.0, d)
        fd_T = central_diff(lambda e: return_map(model, e, 0.0, 0.0, d).sigma, eps, 1e-6)
        assert rm.T == pytest.approx(fd_T, rel=1e-6, abs=1e-10)


# ---------------------------------------------------------------------------
# Return-mapping optimality against an independent grid oracle
# ---------------------------------------------------------------------------


def plastic_update_oracle(model, eps, eps_p_n, p_n, d, n_grid=801):
    """Grid + golden-section oracle for min over (eps_p, p) of the potential
    under p - p_n >= |eps_p - eps_p_n|. The energy grows with p, so the
    constraint is active; search over eps_p with p at the constraint."""

    def fval(eps_p):
        p = p_n + abs(eps_p - eps_p_n)
        return float(model.potential(eps, eps_p, p, d))

    span = abs(eps - eps_p_n) + 2.0 * model.sigma_y / model.E + 1.0
    grid = np.linspace(eps_p_n - span, eps_p_n + span, n_grid)
    p_grid = p_n + np.abs(grid - eps_p_n)
    vals = np.asarray(model.potential(eps, grid, p_grid, d))
    j = int(np.argmin(vals))
    a = grid[max(j - 1, 0)]
    b = grid[min(j + 1, n_grid - 1)]
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1, f2 = fval(x1), fval(x2)
    for _ in range(120):
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = fval(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = fval(x2)
    return min(f1, f2)


@pytest.mark.parametrize("kind", ("sep", "sp"))
def test_return_map_attains_oracle_minimum(kind):
    rng = np.random.default_rng(14)
    for _ in range(500):
        model = random_model(rng, kind)
        eps = float(rng.uniform(-3.0, 3.0))
        eps_p_n = float(rng.uniform(-1.0, 1.0))
        p_n = float(rng.uniform(0.0, 2.0))
        d = float(rng.uniform(0.0, 0.95))
        rm = return_map(model, eps, eps_p_n, p_n, d)
        f_rm = float(model.potential(eps, rm.eps_p, rm.p, d))
        f_star = plastic_update_oracle(model, eps, eps_p_n, p_n, d)
        assert f_rm <= f_star + 1e-10
        assert rm.p >= p_n - 1e-15
        assert abs(rm.eps_p - eps_p_n) <= rm.p - p_n + 1e-12


def test_p_constraint_active_in_2d_grid():
    # Spot-check with a full 2-D grid that allowing p above the constraint
    # never pays off (the hardening term grows with p).
    rng = np.random.default_rng(15)
    for _ in range(40):
        kind = rng.choice(("sep", "sp"))
        model = random_model(rng, kind)
        eps = float(rng.uniform(-2.0, 2.0))
        eps_p_n = float(rng.uniform(-0.5, 0.5))
        p_n = float(rng.uniform(0.0, 1.0))
        d = float(rng.uniform(0.0, 0.9))
        span = abs(eps - eps_p_n) + 2.0
        eg = np.linspace(eps_p_n - span, eps_p_n + span, 161)
        pg = p_n + np.linspace(0.0, 2.0 * span, 161)
        E, P = np.meshgrid(eg, pg, indexing="ij")
        feasible = P - p_n >= np.abs(E - eps_p_n)
        vals = np.where(feasible, model.potential(eps, E, P, d), np.inf)
        jmin = np.unravel_index(np.argmin(vals), vals.shape)
        gap = (P[jmin] - p_n) - abs(E[jmin] - eps_p_n)
        assert gap <= (pg[1] - pg[0]) + 1e-12


# ---------------------------------------------------------------------------
# Convexity sampling
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_discrete_convexity_in_damage(kind):
    rng = np.random.default_rng(16)
    d_grid = np.linspace(0.0, 1.0, 81)
    for _ in range(100):
        # Convex-regime sampling: h2 needs lam <= 1/3 for pointwise convexity.
        while True:
            model = random_model(rng, kind)
            law = getattr(model, "softening", None)
            if law is None or isinstance(law, H1) or law.lam <= 1.0 / 3.0:
                break
        st = random_state(rng, kind)
        vals = np.asarray(model.potential(st.eps, st.eps_p, st.p, d_grid))
        slopes = np.diff(vals) / np.diff(d_grid)
        assert np.all(np.diff(slopes) >= -1e-10)


@pytest.mark.parametrize("kind", KINDS)
def test_discrete_convexity_in_strain_variables(kind):
    rng = np.random.default_rng(17)
    t = np.linspace(-1.0, 1.0, 41)
    for _ in range(100):
        model = random_model(rng, kind)
        st = random_state(rng, kind)
        if kind == "se":
            direction = (float(rng.normal()), 0.0, 0.0)
        else:
            direction = tuple(rng.normal(size=3))
        eps = st.eps + direction[0] * t
        eps_p = st.eps_p + direction[1] * t
        p = st.p + direction[2] * t
        keep = p >= 0.0
        if keep.sum() < 5:
            continue
        vals = np.asarray(model.potential(eps[keep], eps_p[keep], p[keep], st.d))
        tt = t[keep]
        slopes = np.diff(vals) / np.diff(tt)
        assert np.all(np.diff(slopes) >= -1e-9 * max(1.0, np.abs(vals).max()))


# ---------------------------------------------------------------------------
# KKT reconstruction
# ---------------------------------------------------------------------------


def test_kkt_growing_damage_point():
    model = SofteningElasticity(E=1.0, Y_c=1.0, softening=H1())
    eps = 2.0 * np.sqrt(2.0)
    d = 3.0 / 7.0  # stationary point of the damage objective at this strain
    report = kkt_check(model, PointState(eps=eps, d=d), PointState(eps=0.0, d=0.0))
    assert report.lam1 == pytest.approx(0.0, abs=1e-12)
    assert report.lam2 == pytest.approx(0.0, abs=1e-12)
    assert report.max_violation <= 1e-12


def test_kkt_elastic_unloading_point():
    model = SofteningElasticity(E=1.0, Y_c=1.0, softening=H1())
    st = PointState(eps=0.4, d=0.2)
    st_n = PointState(eps=1.0, d=0.2)
    report = kkt_check(model, st, st_n)
    mu = duals(model, st).mu
    assert mu > 0.0
    assert report.lam1 == pytest.approx(mu)
    assert report.max_violation <= 1e-12


def test_kkt_plastic_branch():
    model = SofteningPlasticity(E=1.0, sigma_y=1.0 / 16.0, k=4.0)
    rm = return_map(model, eps=0.5, eps_p_n=0.0, p_n=0.0, d=0.5)
    # damage at its constrained optimum for the updated plastic state
    d_new = float(model.damage_argmin(0.5, rm.eps_p, rm.p, 0.5, D_MAX))
    rm2 = return_map(model, 0.5, 0.0, 0.0, d_new)
    st = PointState(eps=0.5, eps_p=rm2.eps_p, p=rm2.p, d=d_new)
    st_n = PointState(eps=0.0, eps_p=0.0, p=0.0, d=0.5)
    report = kkt_check(model, st, st_n, tol=1e-9)
    R = float(model.yield_R(st.p, st.d))
    assert report.lam_p == pytest.approx(R)
    assert report.max_violation <= 1e-6


def test_kkt_flags_inadmissible_stress():
    model = SofteningPlasticity(E=1.0, sigma_y=0.1, k=1.0)
    # stress far above the current yield stress without plastic flow
    st = PointState(eps=1.0, eps_p=0.0, p=0.0, d=0.0)
    st_n = PointState(eps=0.0, eps_p=0.0, p=0.0, d=0.0)
    report = kkt_check(model, st, st_n)
    assert report.max_violation > 0.5
