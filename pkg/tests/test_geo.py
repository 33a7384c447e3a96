import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from chaosmoother.exceptions import (AssumptionViolation, ConfigError, NoPredecessor,
                                     OnGammaError, OrbitOnDiscontinuity)
from chaosmoother.geo import (ROT_TIME, GeoParams, InvariantDensityEstimator, Phase, D_l,
                              anti_leaf_constants, anti_leaf_set_geo, calibrate_sum_constant,
                              dist_to_breaks, exit_map, f_inverse, f_orbit, f_prime, geo_flow,
                              geo_leaf_constants, geo_point, geo_trajectory, in_tube_ws,
                              invariant_density_f, leaf_set_geo, linear_flow, proof_constants,
                              pullback_intervals, return_map, return_map_f, return_map_g,
                              return_map_inverse, return_times, rot_flow, sigma_to_s, tau_return,
                              tau_sigma)

P = GeoParams()
square = st.floats(-0.5, 0.5).filter(lambda x: abs(x) > 1e-6)


# ----------------------------------------------------------------------------
# parameters


def test_default_parameters_satisfy_assumption():
    assert P.violations() == []
    assert P.alpha == 0.8 and P.beta == 2.0
    lo, hi = 2 ** P.alpha / (math.sqrt(2) * P.alpha), 2 ** P.alpha
    assert lo == pytest.approx(1.539, abs=1e-3) and hi == pytest.approx(1.741, abs=1e-3)


def test_theta_out_of_range_names_inequality():
    with pytest.raises(AssumptionViolation, match="theta"):
        GeoParams(theta=5.0)
    assert GeoParams(theta=5.0, validate=False).violations()


def test_rate_ordering_checked():
    with pytest.raises(AssumptionViolation):
        GeoParams(lambda1=1.0, lambda2=0.5, lambda3=0.8)


# ----------------------------------------------------------------------------
# elementary maps


def test_tau_sigma_values():
    assert tau_sigma(0.5) == pytest.approx(math.log(2))
    assert tau_return(0.5) == pytest.approx(math.log(2) + 1.5 * math.pi)
    xs = [0.4, 0.1, 1e-3, 1e-8]
    ts = [tau_sigma(x) for x in xs]
    assert all(a < b for a, b in zip(ts, ts[1:]))
    with pytest.raises(OnGammaError):
        tau_sigma(0.0)


def test_exit_map_vertices():
    b, a = P.beta, P.alpha
    assert exit_map((0.5, 0.5)) == pytest.approx((1.0, 0.5 ** (1 + b), 0.5 ** a))
    assert exit_map((-0.5, -0.5)) == pytest.approx((-1.0, -(0.5 ** (1 + b)), 0.5 ** a))
    assert exit_map((0.2, 0.0))[1] == 0.0
    # the linear flow reaches the same point at the exit time
    assert linear_flow((0.2, 0.3, 1.0), tau_sigma(0.2)) == pytest.approx(exit_map((0.2, 0.3)))


def test_rotation_endpoints():
    v = exit_map((0.3, -0.2))
    assert rot_flow(v, 0.0) == pytest.approx(v, abs=0)
    assert rot_flow(v, ROT_TIME) == sigma_to_s(v)
    w = exit_map((-0.3, 0.2))
    assert rot_flow(w, ROT_TIME) == sigma_to_s(w)
    with pytest.raises(ConfigError):
        rot_flow(v, 5.0)


def test_rotation_second_coordinate_is_linear():
    v = exit_map((0.3, -0.2))
    for s in np.linspace(0, ROT_TIME, 7):
        assert rot_flow(v, s)[1] == pytest.approx(v[1] - 0.25 * s / ROT_TIME, abs=1e-15)


def test_f_example_and_symmetry():
    assert return_map_f(0.5) == pytest.approx(1.6 * 0.5 ** 0.8 - 0.5)
    assert return_map_f(0.5) == pytest.approx(0.4190, abs=5e-5)
    for x in np.linspace(-0.5, 0.5, 101):
        if x != 0:
            assert return_map_f(-x) == -return_map_f(x)


@settings(max_examples=200, deadline=None)
@given(y=st.floats(-0.5, 0.5))
def test_f_inverse_roundtrip(y):
    for branch in ("pos", "neg"):
        x = f_inverse(y, branch)
        if x is not None:
            assert (x > 0) == (branch == "pos")
            assert return_map_f(x) == pytest.approx(y, abs=1e-12)


def test_f_derivative_against_differences():
    for x in (-0.4, -0.1, 0.05, 0.3):
        h = 1e-7
        fd = (return_map_f(x + h) - return_map_f(x - h)) / (2 * h)
        assert f_prime(x) == pytest.approx(fd, rel=1e-6)


def test_return_map_inverse_roundtrip(rng):
    for _ in range(200):
        o = (rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5))
        assert return_map_inverse(return_map(o)) == pytest.approx(o, abs=1e-12)
    with pytest.raises(NoPredecessor):
        # f never reaches values this close to +-1/2 with the matching g sign
        return_map_inverse((0.49, -0.1))


# ----------------------------------------------------------------------------
# semigroup


@settings(max_examples=100, deadline=None)
@given(o1=square, o2=st.floats(-0.5, 0.5))
def test_full_return_lands_on_first_return_map(o1, o2):
    p = geo_point(o1, o2)
    q = geo_flow(p, tau_return(o1))
    f, g = return_map_f(o1), return_map_g(o1, o2)
    assert q.phase in (Phase.ON_S, Phase.ON_GAMMA)
    assert abs(q.ambient[0] - f) <= 1e-12 and abs(q.ambient[1] - g) <= 1e-12
    assert q.ambient[2] == 1.0


def test_phase_matches_elapsed_time(rng):
    for _ in range(200):
        o1, o2 = rng.uniform(-0.5, 0.5, 2)
        e = rng.uniform(0, tau_return(o1))
        p = geo_point(o1, o2, e)
        ts = tau_sigma(p.o1)
        if p.elapsed == 0:
            assert p.phase is Phase.ON_S
        elif p.elapsed < ts:
            assert p.phase is Phase.LINEAR
        else:
            assert p.phase is Phase.ROTATION
    assert geo_point(0.0, 0.1, 1.0).phase is Phase.ON_GAMMA


def test_ambient_reproduced_from_canonical_form(rng):
    for _ in range(100):
        p = geo_point(*rng.uniform(-0.5, 0.5, 2), rng.uniform(0, 20))
        q = geo_point(p.o1, p.o2, p.elapsed)
        assert q.ambient == p.ambient
        assert p.elapsed < tau_return(p.o1)


def test_flow_semigroup_and_reversal(rng):
    for _ in range(50):
        p = geo_point(*rng.uniform(-0.5, 0.5, 2), rng.uniform(0, 5))
        s, t = rng.uniform(0, 6, 2)
        a = geo_flow(geo_flow(p, s), t).ambient
        b = geo_flow(p, s + t).ambient
        assert np.max(np.abs(np.subtract(a, b))) <= 1e-9
        back = geo_flow(geo_flow(p, s), -s)
        assert np.max(np.abs(np.subtract(back.ambient, p.ambient))) <= 1e-9


def test_speed_bound(rng):
    h = 1e-7
    for _ in range(300):
        p = geo_point(*rng.uniform(-0.5, 0.5, 2), 0.0)
        t = rng.uniform(0, 10)
        a = np.array(geo_flow(p, t).ambient)
        b = np.array(geo_flow(p, t + h).ambient)
        assert np.linalg.norm(b - a) / h <= 1.01 * P.v_max


def test_descent_inside_tube(rng):
    h = 1e-8
    seen = 0
    for _ in range(3000):
        p = geo_flow(geo_point(*rng.uniform(-0.5, 0.5, 2), 0.0), rng.uniform(0, 8))
        if not in_tube_ws(p):
            continue
        q = geo_flow(p, h)
        seen += 1
        assert (q.ambient[2] - p.ambient[2]) / h <= -P.v_min * (1 - 1e-6)
    assert seen > 50


def test_return_times_are_on_square():
    p = geo_point(0.3, 0.1, 0.0)
    rts = return_times(p, 30.0)
    assert len(rts) >= 3
    for t in rts:
        assert geo_flow(p, t).phase is Phase.ON_S


# ----------------------------------------------------------------------------
# expansion and interval pullbacks


def test_expansion_of_f():
    x = np.linspace(-0.5, 0.5, 100_001)
    x = x[np.abs(x) > 0]
    d = np.array([f_prime(v) for v in x])
    assert d.min() > math.sqrt(2)


def test_pullback_level_zero_width():
    for x in (0.3, -0.21, 0.07):
        (iv,), delta = pullback_intervals(x, 0)
        assert delta == dist_to_breaks(x)
        assert iv.width == pytest.approx(delta)


def test_pullback_properties(rng):
    checked = 0
    while checked < 60:
        x = rng.uniform(-0.5, 0.5)
        j = int(rng.integers(1, 9))
        try:
            ivs, _ = pullback_intervals(x, j)
            orb = f_orbit(x, j)
        except OrbitOnDiscontinuity:
            continue
        checked += 1
        for i in range(j + 1):
            iv = ivs[i]
            assert iv.lo <= orb[i] <= iv.hi
            assert iv.lo >= 0 or iv.hi <= 0
            if i < j:
                assert iv.width <= ivs[i + 1].width / math.sqrt(2) * (1 + 1e-9)
        # images of sampled points of the base interval stay away from 0
        for y in np.linspace(ivs[0].lo, ivs[0].hi, 21)[1:-1]:
            if y == 0:
                continue
            z = y
            for i in range(1, j + 1):
                z = return_map_f(z)
                assert abs(z) >= abs(orb[i]) / 2 * (1 - 1e-9)


def test_d_l_formula():
    x = 0.3
    orb = f_orbit(x, 3)
    want = sum(2 ** (-(3 - i) / 4) / dist_to_breaks(orb[i]) ** 2 for i in range(4))
    assert D_l(x, 3) == pytest.approx(want, rel=1e-14)


# ----------------------------------------------------------------------------
# leaves


def test_leaf_rate_constant():
    lam, Cg = geo_leaf_constants()
    assert lam == pytest.approx(2 * math.log(2) / (math.log(2) + 1.5 * math.pi))
    # hand arithmetic: 1.386294 / 5.405536
    assert lam == pytest.approx(0.25646, abs=5e-6)
    assert Cg == pytest.approx(math.exp(1.5 * math.pi * lam))


def test_leaf_points_share_first_and_third_coordinates(rng):
    for _ in range(200):
        u = geo_point(*rng.uniform(-0.5, 0.5, 2), rng.uniform(0, 5))
        seg = leaf_set_geo(u)
        v = seg.point(rng.uniform(seg.offset_min, seg.offset_max))
        assert v.ambient[0] == pytest.approx(u.ambient[0], abs=1e-15)
        assert v.ambient[2] == pytest.approx(u.ambient[2], abs=1e-15)
    with pytest.raises(ConfigError):
        seg.point(10.0)


def test_leaf_contraction_sample(rng):
    lam, Cg = geo_leaf_constants()
    ts = np.linspace(0, 50, 201)
    for _ in range(50):
        u = geo_point(*rng.uniform(-0.5, 0.5, 2), rng.uniform(0, 5))
        seg = leaf_set_geo(u)
        v = seg.point(rng.uniform(seg.offset_min, seg.offset_max))
        d0 = np.max(np.abs(np.subtract(v.ambient, u.ambient)))
        d = np.max(np.abs(geo_trajectory(u, ts) - geo_trajectory(v, ts)), axis=1)
        assert np.all(d <= Cg * d0 * np.exp(-lam * ts) * (1 + 1e-12) + 1e-15)


# ----------------------------------------------------------------------------
# anti-leaves


def test_antileaf_zero_offset_has_zero_profile(geo_u):
    smp = anti_leaf_set_geo(geo_u, 20, 0.05)
    zero = [s for s in smp if s.w1 == geo_u.o1]
    assert len(zero) == 1 and not np.any(zero[0].dists)


def test_antileaf_sum_bound_in_window(geo_u):
    h = 0.001
    first = return_times(geo_u, 10.0)[0]
    k = math.ceil(first / h)
    c = anti_leaf_constants(geo_u, k, h)
    assert c.t_k_window[0] <= k * h <= c.t_k_window[1]
    smp = anti_leaf_set_geo(geo_u, k, h, n=41)
    # proof constant
    assert all(s.total <= c.C_U * s.endpoint * (1 + 1e-9) for s in smp)
    # calibrated constant transfers to a finer sample of the same segment
    C_emp = calibrate_sum_constant(smp, h, c.D_l)
    assert 0 < C_emp < c.C_sum
    fine = anti_leaf_set_geo(geo_u, k, h, n=161)
    assert all(s.total <= 1.5 * C_emp / h * c.D_l * s.endpoint for s in fine if s.endpoint > 0)


@pytest.mark.parametrize("k", [1, 40, 120, 190])
def test_antileaf_reach_exceeds_lower_bound(geo_u, k):
    h = 0.05
    c = anti_leaf_constants(geo_u, k, h)
    smp = anti_leaf_set_geo(geo_u, k, h)
    dmax = max(s.endpoint for s in smp)
    assert dmax >= c.dmax_lower
    assert c.dmax_lower_Dl <= dmax


def test_proof_constants_positive():
    pc = proof_constants()
    assert all(v > 0 for v in pc.values())
    assert pc["h_S_max"] == pytest.approx(1 / (20 * P.v_max))


# ----------------------------------------------------------------------------
# invariant density of f


def test_density_normalized():
    dens, edges, _ = invariant_density_f(n_iter=10 ** 5)
    assert float(np.sum(dens * np.diff(edges))) == pytest.approx(1.0, abs=1e-12)


def test_density_ergodic_and_bounded():
    gaps, sups = [], []
    for n in (10 ** 4, 10 ** 5, 10 ** 6):
        d1, e, _ = invariant_density_f(0.1234, n_iter=n, bins=50)
        d2, _, _ = invariant_density_f(-0.3711, n_iter=n, bins=50)
        gaps.append(np.sum(np.abs(d1 - d2)) * (e[1] - e[0]))
        sups.append(max(d1.max(), d2.max()))
    assert gaps[2] < gaps[0]
    assert gaps[2] < 0.05
    assert max(sups) < 2 * min(sups)


def test_density_estimator_api():
    est = InvariantDensityEstimator(n_iter=10 ** 4, bins=20)
    assert clone(est).get_params()["bins"] == 20
    est.fit()
    vals = est.predict([-0.49, 0.0, 0.49])
    assert vals.shape == (3,) and np.all(vals >= 0)
    assert est.bin_edges_.size == 21
