import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from chaosmoother.exceptions import ConfigError, UnidentifiableAtZero
from chaosmoother.identify import (MinimaxEstimator, derivative_stack, emax, fd_coefficients,
                                   fd_derivative_estimate, fd_moments, identifiability_rank,
                                   minimax_estimate, observed_derivatives_from_data,
                                   pushforward_estimate, random_coefficient_experiment,
                                   recover_lorenz63, recover_lorenz96)
from chaosmoother.models import get_preset, lorenz63_from_xyz
from chaosmoother.observe import ObsSetup, generate_observations
from chaosmoother.quadode import field_jacobian, sample_ball, taylor_derivatives, trajectory

E1 = np.array([[1.0, 0.0, 0.0]])


# ----------------------------------------------------------------------------
# derivative stack and rank test


def test_stack_low_orders(l63, u63):
    H = np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
    s = derivative_stack(l63, H, u63, 3)
    assert s.values.shape == (4, 2) and s.gradients.shape == (4, 2, 3)
    np.testing.assert_allclose(s.gradients[0], H)
    np.testing.assert_allclose(s.gradients[1], H @ field_jacobian(l63, u63), rtol=1e-13)
    np.testing.assert_allclose(s.values, taylor_derivatives(l63, u63, 3) @ H.T, rtol=1e-12)


def test_stack_gradients_match_finite_differences(l63, u63):
    H = np.eye(3)
    s = derivative_stack(l63, H, u63, 4)
    eps = 1e-6
    for c in range(3):
        e = np.zeros(3)
        e[c] = eps
        fd = (derivative_stack(l63, H, u63 + e, 4).values
              - derivative_stack(l63, H, u63 - e, 4).values) / (2 * eps)
        scale = np.abs(s.gradients[:, :, c]).max(axis=1, keepdims=True) + 1
        assert np.all(np.abs(fd - s.gradients[:, :, c]) <= 1e-5 * scale)


def test_rank_lorenz63_paper_first_coordinate():
    sys = get_preset("lorenz63-paper")
    u = lorenz63_from_xyz([1.0, 2.0, 3.0], sys.meta["params"])
    r = identifiability_rank(sys, E1, u, 2)
    assert r.passed and r.lambda_min > 0 and r.lambda_min_normalized > 1e-10


def test_rank_lorenz96_first_three(l96):
    r = identifiability_rank(l96, np.eye(5)[:3], np.arange(1.0, 6.0), 2)
    assert r.passed


def test_rank_zero_observation(l63, u63):
    r = identifiability_rank(l63, np.zeros((1, 3)), u63, 3)
    assert not r.passed and r.lambda_min == 0.0


def test_rank_too_few_orders(l63, u63):
    assert not identifiability_rank(l63, E1, u63, 1).passed


def test_rank_invariant_under_row_rotation(l96, rng):
    H = np.eye(5)[:3]
    u = np.arange(1.0, 6.0)
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    a = identifiability_rank(l96, H, u, 2)
    b = identifiability_rank(l96, Q @ H, u, 2)
    assert b.lambda_min == pytest.approx(a.lambda_min, rel=1e-10)


# ----------------------------------------------------------------------------
# explicit recovery


def test_lorenz63_recovery_roundtrip(rng):
    sys = get_preset("lorenz63-paper")
    p = sys.meta["params"]
    U = sample_ball(3, sys.R, 1500, rng)
    U = U[np.abs(U[:, 0]) > 0.01][:1000]
    assert len(U) == 1000
    for u in U:
        vals = derivative_stack(sys, E1, u, 2).values[:, 0]
        got = recover_lorenz63(vals, p)
        assert np.linalg.norm(got - u) <= 1e-9 * max(1.0, np.linalg.norm(u))


def test_lorenz63_recovery_fails_at_zero():
    sys = get_preset("lorenz63-paper")
    u = np.array([0.0, 1.0, 2.0])
    vals = derivative_stack(sys, E1, u, 2).values[:, 0]
    with pytest.raises(UnidentifiableAtZero):
        recover_lorenz63(vals, sys.meta["params"])


def test_lorenz63_recovery_velocity_relation():
    # D u1 = a (u2 - u1) in the shifted coordinates
    sys = get_preset("lorenz63-paper")
    a = sys.meta["params"].a
    u = np.array([0.7, -1.3, 4.0])
    vals = derivative_stack(sys, E1, u, 2).values[:, 0]
    assert vals[1] == pytest.approx(a * (u[1] - u[0]), rel=1e-14)


@pytest.mark.parametrize("d,tol", [(5, 1e-9), (8, 1e-8)])
def test_lorenz96_recovery_roundtrip(d, tol):
    sys = get_preset(f"lorenz96-d{d}")
    u = np.arange(1.0, d + 1)
    vals = derivative_stack(sys, np.eye(d)[:3], u, d - 3).values
    got = recover_lorenz96(vals, d)
    assert np.abs(got - u).max() <= tol * np.abs(u).max()


def test_lorenz96_refinement_matters():
    d = 8
    sys = get_preset(f"lorenz96-d{d}")
    u = np.arange(1.0, d + 1)
    vals = derivative_stack(sys, np.eye(d)[:3], u, d - 3).values
    raw = np.abs(recover_lorenz96(vals, d, refine=0) - u).max()
    fine = np.abs(recover_lorenz96(vals, d) - u).max()
    assert fine <= raw


def test_lorenz96_recovery_fails_on_zero_component():
    sys = get_preset("lorenz96-d5")
    u = np.array([1.0, 0.0, 3.0, 4.0, 5.0])
    vals = derivative_stack(sys, np.eye(5)[:3], u, 2).values
    with pytest.raises(UnidentifiableAtZero) as info:
        recover_lorenz96(vals, 5)
    assert info.value.index == 2


def test_lorenz96_recovery_needs_orders():
    with pytest.raises(ConfigError):
        recover_lorenz96(np.zeros((2, 3)), 5)


# ----------------------------------------------------------------------------
# finite differences


def test_fd_weights_examples():
    assert fd_coefficients(1) == [Fraction(-1), Fraction(1)]
    assert fd_coefficients(2) == [1, -2, 1]
    assert fd_coefficients(0) == [1]


@settings(max_examples=7, deadline=None)
@given(i=st.integers(0, 6))
def test_fd_moments_exact(i):
    b = fd_moments(fd_coefficients(i))
    assert b == [Fraction(int(m == i)) for m in range(i + 1)]


def test_fd_estimate_zero_at_fixed_point(l63):
    u = lorenz63_from_xyz([0.0, 0.0, 0.0], l63.meta["params"])
    for i in range(1, 4):
        assert np.abs(fd_derivative_estimate(l63, E1, u, i, 0.01)).max() < 1e-8


@pytest.mark.parametrize("i", [1, 2, 3])
def test_fd_estimate_first_order(l63, u63, i):
    exact = derivative_stack(l63, E1, u63, i).values[i]
    errs = [np.abs(fd_derivative_estimate(l63, E1, u63, i, h) - exact).max()
            for h in (4e-3, 2e-3)]
    assert 1.7 <= errs[0] / errs[1] <= 2.3


def test_fd_gap_scales_with_state_distance(l63, u63):
    # |FD(u) - FD(v)| / |u - v| stays bounded as v -> u
    i, h = 2, 1e-2
    base = fd_derivative_estimate(l63, E1, u63, i, h)
    quot = []
    for s in (1e-2, 1e-3, 1e-4):
        v = u63 + s * np.array([1.0, -1.0, 0.5])
        quot.append(np.abs(fd_derivative_estimate(l63, E1, v, i, h) - base).max() / s)
    assert max(quot) / min(quot) < 1.2


def test_polynomial_derivative_estimates(l63, u63):
    h = 1e-3
    Y = trajectory(l63, u63, h * np.arange(40)).states @ E1.T
    got = observed_derivatives_from_data(Y, h, 2)
    want = derivative_stack(l63, E1, u63, 2).values
    np.testing.assert_allclose(got, want, rtol=1e-3)


# ----------------------------------------------------------------------------
# minimax estimation


@pytest.fixture(scope="module")
def paper_obs():
    sys = get_preset("lorenz63-paper")
    u = lorenz63_from_xyz([1.0, 2.0, 3.0], sys.meta["params"])
    setup = ObsSetup(E1, 0.05, 20, "gaussian", 1e-9)
    return sys, u, generate_observations(sys, u, setup, seed=4)


def test_minimax_recovers_state_without_noise(paper_obs):
    sys, u, rec = paper_obs
    res = minimax_estimate(sys, rec, n_starts=4, seed=0, truth=u)
    assert res.emax <= res.emax_truth * (1 + 1e-9) + 1e-12
    assert np.linalg.norm(res.u_min - u) < 1e-5
    np.testing.assert_allclose(pushforward_estimate(sys, res, 0.0), res.u_min)


def test_minimax_beats_truth_with_noise():
    sys = get_preset("lorenz63-paper")
    u = lorenz63_from_xyz([1.0, 2.0, 3.0], sys.meta["params"])
    rec = generate_observations(sys, u, ObsSetup(E1, 0.05, 20, "gaussian", 0.05), seed=2)
    est = MinimaxEstimator(system=sys, H=E1, h=0.05, n_starts=4).fit(rec.Y)
    assert est.emax_ <= emax(sys, E1, rec.setup.times, rec.Y, u) + 1e-12
    assert est.score(rec.Y) == pytest.approx(-est.emax_)
    assert est.predict([0.0, 0.5]).shape == (2, 3)


def test_minimax_estimator_conventions(l63):
    est = MinimaxEstimator(system=l63, H=E1, n_starts=3)
    c = clone(est)
    assert c.get_params()["n_starts"] == 3
    np.testing.assert_array_equal(c.system.B, l63.B)
    with pytest.raises(ConfigError):
        MinimaxEstimator().fit(np.zeros((5, 1)))


# ----------------------------------------------------------------------------
# random coefficients


def test_random_experiment_without_derivatives_fails():
    out = random_coefficient_experiment(3, 0, 5, n_probe=0)
    assert out["pass_count"] == 0 and len(out["failures"]) == 5


def test_random_experiment_small_run():
    out = random_coefficient_experiment(3, 2, 10, n_probe=1)
    assert out["pass_count"] >= 9 and out["n_trials"] == 10
    assert math.isfinite(out["pass_count"])
