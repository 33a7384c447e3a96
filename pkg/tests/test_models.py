import numpy as np
import pytest

from chaosmoother.exceptions import ConfigError
from chaosmoother.geo import GeoParams
from chaosmoother.models import (Lorenz63Params, Lorenz96Params, get_preset, lorenz63_from_xyz,
                                 lorenz63_system, lorenz63_to_xyz, lorenz96_system,
                                 random_system)
from chaosmoother.quadode import QuadraticSystem, bilinear, eval_vector_field


def test_lorenz63_bilinear_at_ones(l63):
    # B(u,u)_2 = u1 u3 and B(u,u)_3 = -u1 u2
    np.testing.assert_array_equal(bilinear(l63, [1, 1, 1], [1, 1, 1]), [0.0, 1.0, -1.0])


def test_lorenz63_printed_field_at_zero():
    p = Lorenz63Params(forcing_convention="printed")
    got = eval_vector_field(lorenz63_system(p), np.zeros(3))
    np.testing.assert_allclose(got, [0.0, 0.0, -p.b / p.r + p.a])


def test_lorenz63_shift_convention_has_fixed_origin(l63):
    p = l63.meta["params"]
    u = lorenz63_from_xyz([0.0, 0.0, 0.0], p)
    np.testing.assert_allclose(eval_vector_field(l63, u), 0.0, atol=1e-12)
    np.testing.assert_allclose(lorenz63_to_xyz(u, p), 0.0)


def test_lorenz63_params_checked():
    with pytest.raises(ConfigError):
        Lorenz63Params(a=-1.0)
    with pytest.raises(ConfigError):
        Lorenz63Params(forcing_convention="other")


@pytest.mark.parametrize("d", [4, 5, 8])
def test_lorenz96_classical_form(d, rng):
    s = lorenz96_system(Lorenz96Params(d=d))
    for _ in range(20):
        u = rng.uniform(-5, 5, d)
        direct = np.array([(u[(i + 1) % d] - u[i - 2]) * u[i - 1] - u[i] + 8.0 for i in range(d)])
        np.testing.assert_allclose(eval_vector_field(s, u), direct, rtol=1e-13, atol=1e-12)


@pytest.mark.parametrize("d", [4, 5, 8])
def test_lorenz96_energy_conserving(d, rng):
    s = lorenz96_system(Lorenz96Params(d=d))
    U = rng.standard_normal((1000, d))
    e = np.einsum("ijk,nj,nk,ni->n", s.B, U, U, U)
    assert np.abs(e).max() < 1e-12


def test_lorenz96_component_three(l96):
    assert eval_vector_field(l96, [1, 2, 3, 4, 5])[2] == 11.0


def test_lorenz96_needs_four_dims():
    with pytest.raises(ConfigError):
        Lorenz96Params(d=3)
    with pytest.raises(ConfigError):
        get_preset("lorenz96-d3")


def test_random_system_deterministic():
    s1, u1 = random_system(4, seed=7)
    s2, u2 = random_system(4, seed=7)
    for name in ("A", "B", "f"):
        assert np.array_equal(getattr(s1, name), getattr(s2, name))
    assert np.array_equal(u1, u2)
    s3, _ = random_system(4, seed=8)
    assert not np.array_equal(s1.B, s3.B)


def test_random_system_entries_in_range():
    for seed in range(20):
        s, u = random_system(3, seed=seed)
        for arr in (s.A, s.B, s.f, u):
            assert arr.min() >= 1 and arr.max() <= 10
            assert np.array_equal(arr, np.round(arr))
        assert np.linalg.norm(u) <= s.R


def test_presets_resolve():
    assert isinstance(get_preset("geo"), GeoParams)
    assert get_preset("lorenz63-paper").meta["params"].a == 27.0
    assert get_preset("lorenz63-classical").meta["params"].r == 28.0
    s = get_preset("random-d3-seed5")
    assert isinstance(s, QuadraticSystem) and s.dim == 3
    with pytest.raises(ConfigError, match="known patterns"):
        get_preset("lorenz84")
