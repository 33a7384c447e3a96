import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from chaosmoother.exceptions import ConfigError, DegenerateInputError
from chaosmoother.geo import geo_point
from chaosmoother.leafcraft import (CroppedLeafSpec, LeafConstantRegressor, LeafSample,
                                    antileaf_direction, antileaf_profile,
                                    characterize_support_limit, construct_leaf_backward,
                                    fit_leaf_constants, geo_leaf_samples, leaf_integrals)
from chaosmoother.observe import ObsSetup
from chaosmoother.quadode import (QuadraticSystem, flow_with_jacobian, perturbation_forward,
                                  system_constants)


def linear_system(rates):
    # du/dt = -diag(rates) u
    d = len(rates)
    return QuadraticSystem(np.diag(rates), np.zeros((d, d, d)), np.zeros(d), 10.0, 1.0)


# ----------------------------------------------------------------------------
# backward construction


def test_zero_radius_returns_u(l63, u63):
    ls = construct_leaf_backward(l63, u63, T=1.0, n=5, radius=0.0, with_integrals=False)
    assert len(ls.samples) == 5
    for s in ls.samples:
        assert np.array_equal(s.v0, u63) and s.offset == 0.0


def test_backward_samples_lie_on_a_curve(l63, u63):
    ls = construct_leaf_backward(l63, u63, T=5.0, n=100, seed=0, with_integrals=False)
    assert ls.radius == 1e-31 and ls.n_dropped == 0
    X = np.array([s.delta0 for s in ls.samples])
    Xc = X - X.mean(axis=0)
    _, _, Vt = np.linalg.svd(Xc, full_matrices=False)
    proj = Xc @ Vt[0]
    perp = np.linalg.norm(Xc - np.outer(proj, Vt[0]), axis=1)
    assert perp.max() <= 1e-3 * (proj.max() - proj.min())


def test_backward_roundtrip(l63, u63):
    T, radius = 0.5, 1e-31
    ls = construct_leaf_backward(l63, u63, T=T, n=10, radius=radius, seed=3,
                                 with_integrals=False)
    for s in ls.samples:
        _, D = perturbation_forward(l63, u63, s.delta0, np.array([0.0, T]))
        assert np.abs(D[-1]).max() <= 2 * radius


def test_backward_samples_sorted_and_contracting(l96):
    u = np.arange(1.0, 6.0)
    ls = construct_leaf_backward(l96, u, T=5.0, n=20, seed=1, with_integrals=False)
    offs = [s.offset for s in ls.samples]
    assert offs == sorted(offs)
    # the leaf direction shrinks going forward, so backward offsets exceed the radius
    assert min(offs) > ls.radius


# ----------------------------------------------------------------------------
# integrals


def test_integrals_vanish_at_u(l63, u63):
    assert leaf_integrals(l63, u63, v0=u63, T=1.0) == (0.0, 0.0)
    with pytest.raises(ConfigError):
        leaf_integrals(l63, u63, T=1.0)


@pytest.mark.parametrize("c", [1e-3, -0.5, 2.0])
def test_scalar_decay_closed_form(c):
    s = linear_system([1.0])
    T = 20.0
    I1, I2 = leaf_integrals(s, [0.0], v0=[c], T=T)
    # the truncation beyond T is c^2 e^{-2T}/2 < 1e-17 c^2
    assert I2 == pytest.approx(c * c / 2, rel=1e-8)
    assert I1 == pytest.approx(abs(c) * (1 - math.exp(-T)), rel=1e-8)


def test_integral_against_riemann_sum(l63, u63):
    d0 = np.array([1e-6, 2e-6, -1e-6])
    T = 2.0
    I1, _ = leaf_integrals(l63, u63, T=T, delta0=d0)
    errs = []
    for n in (200, 400, 800):
        times = np.linspace(0, T, n + 1)
        _, D = perturbation_forward(l63, u63, d0, times)
        h = T / n
        errs.append(abs(h * np.abs(D[:-1]).sum() - I1))
    # first order; kinks of |delta| make the ratios wobble around 2
    scaled = [e * n for e, n in zip(errs, (200, 400, 800))]
    assert max(scaled) / min(scaled) < 1.5
    assert errs[2] < errs[0] / 3


def test_integral_handles_sign_changes(l96):
    u = np.arange(1.0, 6.0)
    ls = construct_leaf_backward(l96, u, T=5.0, n=2, seed=0, with_integrals=True)
    for s in ls.samples:
        assert s.I1 > 0 and s.I2 > 0


# ----------------------------------------------------------------------------
# fits


def make_samples(x, y, y2=None):
    return [LeafSample(np.zeros(1), np.array([a]), a, I1=b,
                       I2=(b if y2 is None else c)) for a, b, c in
            zip(x, y, y2 if y2 is not None else y)]


def test_exact_linear_fit():
    x = np.array([0.5, 1.0, 2.0, 3.0])
    fit = fit_leaf_constants(make_samples(x, 2.5 * x))
    assert fit.slope == pytest.approx(2.5) and fit.r2 == pytest.approx(1.0)
    assert fit.sup_ratio == pytest.approx(1.0) and fit.d_max == 3.0


@settings(max_examples=50, deadline=None)
@given(perm_seed=st.integers(0, 10 ** 6))
def test_fit_invariant_to_sample_order(perm_seed):
    r = np.random.default_rng(0)
    x = r.uniform(0.1, 1, 20)
    y = 3 * x + 0.01 * r.standard_normal(20)
    smp = make_samples(x, y)
    base = fit_leaf_constants(smp)
    order = np.random.default_rng(perm_seed).permutation(20)
    other = fit_leaf_constants([smp[i] for i in order])
    assert other.slope == pytest.approx(base.slope, rel=1e-14)
    assert other.r2 == pytest.approx(base.r2, rel=1e-12)


def test_fit_rejects_degenerate_input():
    with pytest.raises(DegenerateInputError):
        fit_leaf_constants(make_samples([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]))
    with pytest.raises(ConfigError):
        fit_leaf_constants(make_samples([1.0, 2.0, 3.0], [1, 2, 3]), norm="Linf")


def test_geo_leaf_constant_bounds_every_sample(geo_params, geo_u):
    times = 0.1 * np.arange(101)
    smp = geo_leaf_samples(geo_u, np.linspace(-0.02, 0.02, 41), times, geo_params)
    X = [s.offset_l1 for s in smp]
    y = [s.profile.D1 for s in smp]
    reg = LeafConstantRegressor().fit(X, y)
    assert math.isfinite(reg.coef_) and reg.coef_ > 0
    assert reg.violations(X, y) == 0
    assert reg.r2_ > 0.98


def test_regressor_follows_estimator_conventions():
    reg = LeafConstantRegressor(violation_tol=1e-3)
    assert clone(reg).get_params() == {"violation_tol": 1e-3}
    x = np.linspace(1, 2, 5)
    reg.fit(x, 4 * x)
    np.testing.assert_allclose(reg.predict([1.0, 3.0]), [4.0, 12.0])
    assert reg.score(x, 4 * x) == pytest.approx(1.0)


def test_lorenz63_leaf_small_sample(l63, u63):
    ls = construct_leaf_backward(l63, u63, T=5.0, n=15, seed=5)
    for norm in ("L1", "L2sq"):
        assert fit_leaf_constants(ls.samples, norm).r2 >= 0.98


# ----------------------------------------------------------------------------
# anti-leaf direction


def test_direction_at_time_zero(l63, u63):
    np.testing.assert_array_equal(antileaf_direction(l63, u63, 0), [1.0, 0.0, 0.0])


def test_direction_of_diagonal_system():
    s = linear_system([-1.0, 1.0])
    w = antileaf_direction(s, [0.3, 0.2], 1.0)
    np.testing.assert_allclose(w, [1.0, 0.0], atol=1e-10)
    np.testing.assert_allclose(antileaf_direction(s, [0.3, 0.2], 1.0, method="eigen"),
                               [1.0, 0.0], atol=1e-10)


@pytest.mark.parametrize("tk", [0.5, 2.0])
def test_power_iteration_matches_svd(l63, u63, tk):
    w = antileaf_direction(l63, u63, tk)
    _, J = flow_with_jacobian(l63, u63, tk)
    v = np.linalg.svd(J)[2][0]
    assert min(np.linalg.norm(w - v), np.linalg.norm(w + v)) <= 1e-6


def test_direction_maximizes_growth(l63, u63, rng):
    tk = 1.0
    w = antileaf_direction(l63, u63, tk)
    _, J = flow_with_jacobian(l63, u63, tk)
    best = np.linalg.norm(J @ w)
    W = rng.standard_normal((1000, 3))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    assert np.all(np.linalg.norm(W @ J.T, axis=1) <= best * (1 + 1e-12))


def test_direction_method_checked(l63, u63):
    with pytest.raises(ConfigError):
        antileaf_direction(l63, u63, 1.0, method="qr")


# ----------------------------------------------------------------------------
# anti-leaf profile


def test_profile_expanding_scalar_closed_form():
    s = linear_system([-1.0])
    rows = antileaf_profile(s, [0.0], [0.5, 1.0, 3.0], segment_steps=5, seg_len=1e-3, h=0.1)
    for r in rows:
        want = 1 - math.exp(-r.tk)
        assert r.C_hat == pytest.approx(want, rel=1e-7)
        assert r.linear_ok
        # the Riemann version h * sum_i e^{-h i} tends to the same limit
        k = int(round(r.tk / 0.1))
        riemann = 0.1 * sum(math.exp(-0.1 * i) for i in range(k)) * math.exp(-0.1)
        assert abs(r.C_hat_sum * 0.1 - riemann) <= 0.1


def test_profile_small_segment_limit(l63, u63):
    vals = [antileaf_profile(l63, u63, [0.6], segment_steps=4, seg_len=L)[0].C_hat
            for L in (1e-4, 1e-7, 1e-10)]
    assert all(math.isfinite(v) and v > 0 for v in vals)
    assert vals[2] == pytest.approx(vals[1], rel=1e-3)


# ----------------------------------------------------------------------------
# support limit on the geometric model


def test_cropped_spec_bound():
    assert CroppedLeafSpec.t_max_bound(1.0, 2.0, 3.0) == pytest.approx(1 / 36)
    spec = CroppedLeafSpec(0.01, 0.01)
    assert spec.admissible(1.0, 2.0, 3.0)
    assert not CroppedLeafSpec(0.01, 0.5).admissible(1.0, 2.0, 3.0)
    with pytest.raises(ConfigError):
        CroppedLeafSpec(-0.1, 0.01)


def test_support_limit_envelope(geo_params, geo_u):
    eps = 0.01
    setup = ObsSetup(np.eye(3), 0.1, 60, "uniform", eps)
    res = characterize_support_limit(geo_params, geo_u, CroppedLeafSpec(eps, 0.05), setup,
                                     n_seeds=100, seed=0)
    assert np.all(np.diff(res.envelope) <= 0)
    assert res.envelope[-1] < 0.2 * res.envelope[0]
    assert np.all(res.leaf_inclusion > 0)
    assert all(v >= 0 for v in res.first_exclusion.values())
    assert len(res.rows()) == 61


def test_support_limit_from_start_of_orbit_skips_missing_predecessors(geo_params):
    u = geo_point(0.3, 0.1, 0.0, geo_params)
    setup = ObsSetup(np.eye(3), 0.1, 10, "uniform", 0.01)
    res = characterize_support_limit(geo_params, u, CroppedLeafSpec(0.01, 0.05, n_ambient=20),
                                     setup, n_seeds=20)
    assert res.n_skipped >= 0 and res.envelope.size == 11


def test_support_limit_input_checks(geo_params, geo_u, l63):
    spec = CroppedLeafSpec(0.01, 0.05)
    with pytest.raises(ConfigError):
        characterize_support_limit(geo_params, geo_u, spec,
                                   ObsSetup(np.eye(3), 0.1, 5, "gaussian", 0.01))
    with pytest.raises(ConfigError):
        characterize_support_limit(geo_params, geo_u, spec,
                                   ObsSetup(np.eye(3), 0.1, 5, "uniform", 0.02))
    with pytest.raises(ConfigError):
        characterize_support_limit(l63, geo_u, spec, ObsSetup(np.eye(3), 0.1, 5, "uniform", 0.01))


def test_shift_bound_uses_system_constants(l63):
    c = system_constants(l63)
    bound = CroppedLeafSpec.t_max_bound(0.1, c.a_max, c.v_max)
    assert 0 < bound < 1e-3
