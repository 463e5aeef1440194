import math

import numpy as np
import pytest

from kreinwave import evolution as ev
from kreinwave import strings
from kreinwave.measures import DomainError, ValidationError
from kreinwave.strings import MassDistribution

LAM = ev.k_grid(40.0, 4000) ** 2


def homogeneous(xi_max=40.0):
    return MassDistribution.constant(1.0, xi_max)


def dalembert(u0, x, t):
    return 0.5 * (u0(x + t) + u0(np.abs(x - t)))


def test_discretize_masses():
    lat = ev.discretize(MassDistribution.constant(1.0, 10.0), 0.01)
    np.testing.assert_allclose(lat.m[1:-1], 0.01)
    M = MassDistribution.constant(1.0, 10.0, atoms=[(1.0, 3.0)])
    lat = ev.discretize(M, 0.01)
    i = int(np.argmin(np.abs(lat.xi - 1.0)))
    assert lat.m[i] == pytest.approx(3.01)


def test_discretize_total_mass():
    M = MassDistribution([0.0, 1.0, 2.5], [2.0, 0.5, 1.0], atoms=[(1.7, 0.3)], xi_max=4.0)
    lat = ev.discretize(M, 0.05)
    assert lat.total_mass == pytest.approx(M.mass(4.0), rel=1e-12)


def test_empty_segments_are_condensed():
    M = MassDistribution([0.0, 1.0, 2.0], [1.0, 0.0, 1.0], atoms=[(1.5, 1.0)], xi_max=3.0)
    lat = ev.discretize(M, 0.1)
    assert np.all(lat.m > 0)
    assert 1.5 in np.round(lat.xi, 12)


def test_dalembert():
    lat = ev.discretize(homogeneous(), 0.01)
    u0 = ev.bump_profile(5.0, 1.0)
    (state,) = ev.simulate(lat, u0, [20.0])
    exact = dalembert(u0, lat.xi, state.t)
    err = math.sqrt(np.sum(lat.m * (state.u - exact) ** 2) / np.sum(lat.m * exact**2))
    assert err < 0.02


def test_zero_data_stays_zero():
    lat = ev.discretize(homogeneous(10.0), 0.05)
    (state,) = ev.simulate(lat, np.zeros(len(lat.xi)), [5.0])
    assert np.all(state.u == 0)


def test_energy_conservation(rng):
    M = strings.two_material_string(3.0, 1.0, rng.uniform(0.1, 0.9, 15), 16)
    lat = ev.discretize(M, 0.01)
    s0 = ev.initial_state(lat, ev.bump_profile(3.0, 1.5))
    e0 = ev.energy(lat, s0)
    s1 = ev.step_leapfrog(lat, s0, n_steps=10_000)
    assert abs(ev.energy(lat, s1) - e0) / e0 < 1e-4


def test_cfl_refusal():
    lat = ev.discretize(homogeneous(5.0), 0.01)
    with pytest.raises(ev.CFLError) as err:
        ev.initial_state(lat, np.zeros(len(lat.xi)), dt=0.02)
    assert 0 < err.value.suggested < 0.02


def test_front_homogeneous():
    h = 0.01
    lat = ev.discretize(homogeneous(), h)
    M = homogeneous()
    for s in ev.simulate(lat, ev.ramp_profile(2.0, 5 * h), [5.0, 10.0, 20.0]):
        assert abs(ev.detect_front(lat, s) - strings.wavefront(M, 2.0, s.t)) <= 2 * h + 1e-12


def test_near_front_mass():
    M = homogeneous(60.0)
    lat = ev.discretize(M, 0.01)
    u0 = ev.bump_profile(0.0, 2.0)
    a, b = (ev.near_front_mass(M, lat, s, 2.0, 2.0) for s in ev.simulate(lat, u0, [10.0, 40.0]))
    assert a > 0 and b == pytest.approx(a, rel=0.01)
    zero = ev.simulate(lat, np.zeros(len(lat.xi)), [10.0])[0]
    assert ev.near_front_mass(M, lat, zero, 2.0, 2.0) == 0


def test_near_front_window_past_lattice():
    M = homogeneous(20.0)
    lat = ev.discretize(M, 0.05)
    (s,) = ev.simulate(lat, ev.bump_profile(0.0, 2.0), [30.0])
    with pytest.raises(ValidationError):
        ev.near_front_mass(M, lat, s, 2.0, 2.0)


def test_spectral_matches_dalembert():
    M = homogeneous(20.0)
    nodes = np.linspace(0, 15, 1501)
    u0 = ev.bump_profile(3.0, 1.5)
    for t in (0.0, 10.0):
        u = ev.evolve_spectral(M, nodes, u0, t, LAM)
        exact = dalembert(u0, nodes, t)
        assert np.linalg.norm(u - exact) / np.linalg.norm(exact) < 0.02


def test_spectral_matches_leapfrog():
    # few cells: long random stacks trap narrow resonances that a uniform k-grid misses
    M = strings.two_material_string(2.0, 1.0, [0.5, 0.3, 0.2, 0.4, 0.25], 6)
    lat = ev.discretize(M, 0.01, xi_max=25.0)
    u0 = ev.bump_profile(3.0, 1.5)
    (s,) = ev.simulate(lat, u0, [10.0])
    us = ev.evolve_spectral(M, lat.xi, u0, s.t, LAM)
    assert math.sqrt(np.sum(lat.m * (us - s.u) ** 2) / np.sum(lat.m * s.u**2)) < 0.05


def test_traveling_wave_homogeneous():
    M = homogeneous(60.0)
    nodes = 0.01 * np.arange(401)
    u0 = ev.bump_profile(2.0, 2.0)
    tw = ev.traveling_wave_profile(M, nodes, u0(nodes), np.linspace(-40, 40, 8001), LAM)
    assert tw.norm_ratio == pytest.approx(1.0, abs=0.03)
    # on the free string the profile is the even extension of u0 read backwards
    eta = np.array([-3.0, -2.0, -1.0, 0.5])
    np.testing.assert_allclose(tw(eta), u0(-eta) + u0(eta), atol=5e-3)
    zero = ev.traveling_wave_profile(M, nodes, np.zeros(401), np.linspace(-5, 5, 11), LAM)
    assert np.all(zero.G == 0)


def test_traveling_wave_rejects_non_szego(slow_string):
    nodes = 0.01 * np.arange(201)
    with pytest.raises(DomainError):
        ev.traveling_wave_profile(slow_string, nodes, np.ones(201), np.linspace(-5, 5, 11), LAM)


def test_modified_free_evolution():
    eta = np.linspace(-10, 10, 2001)
    G = (eta, np.exp(-eta**2))
    x = np.array([0.5, 1.0, 2.0])
    out = ev.modified_free_evolution(homogeneous(), G, 0.0, x)
    np.testing.assert_allclose(out, 0.5 * np.exp(-x**2), rtol=1e-4)
    out4 = ev.modified_free_evolution(MassDistribution.constant(4.0, 10.0), G, 1.0, x)
    np.testing.assert_allclose(out4, 0.5 / math.sqrt(2) * np.exp(-(2 * x - 1) ** 2), rtol=1e-3, atol=1e-6)


def test_free_dirac_example():
    Z = np.zeros((100, 2))
    Z[:, 0] = 1.0
    U = ev.free_dirac_evolution(Z, 5.0, 0.01)
    assert U.shape == (600, 2)
    np.testing.assert_array_equal(U[:400], 0)
    np.testing.assert_array_equal(U[400:], np.tile([0.5, -0.5j], (200, 1)))


def test_free_dirac_unitary_and_identity(rng):
    Z = rng.normal(size=(300, 2)) + 1j * rng.normal(size=(300, 2))
    np.testing.assert_array_equal(ev.free_dirac_evolution(Z, 0.0, 0.1), Z)
    for t in (1.0, 10.0, 100.0):
        U = ev.free_dirac_evolution(Z, t, 0.1)
        assert ev.dirac_norm(U, 0.1) == pytest.approx(ev.dirac_norm(Z, 0.1), rel=1e-12)


def test_free_dirac_rejects_off_grid_time():
    with pytest.raises(ValidationError):
        ev.free_dirac_evolution(np.ones((4, 2)), 0.15, 0.1)


def test_cesaro_localization():
    M = homogeneous(215.0)
    lat = ev.discretize(M, 0.02)
    u0 = ev.bump_profile(2.0, 2.0)
    norm0 = float(np.sum(lat.m * u0(lat.xi) ** 2))
    vals = [ev.cesaro_localization(lat, u0, 5.0, T) for T in (50.0, 100.0, 200.0)]
    assert vals[-1] < 0.05 * norm0
    assert vals[0] >= vals[1] >= vals[2]
    assert ev.cesaro_localization(lat, np.zeros(len(lat.xi)), 5.0, 50.0) == 0


@pytest.mark.parametrize("spec", [
    {"kind": "bump", "center": 1.0, "radius": -1.0},
    {"kind": "ramp", "front": 1.0, "width": 2.0},
    {"kind": "gauss"},
    {"kind": "bump"},
])
def test_initial_profile_validation(spec):
    with pytest.raises(ValidationError):
        ev.initial_profile(spec)
