import json
import math

import numpy as np
import pytest

from kreinwave import measures as ms
from kreinwave.measures import NEG_INFINITY, PowerTail, SpectralMeasure


def lorentz():
    x = np.linspace(-1e4, 1e4, 400_001)
    return SpectralMeasure("line", x, 1 / (1 + x**2), tail=PowerTail(-2.0, 1.0))


def lebesgue():
    x = np.linspace(-10, 10, 101)
    return SpectralMeasure("line", x, np.ones_like(x), tail=PowerTail(0.0, 1.0))


@pytest.fixture(scope="module")
def mu_lorentz():
    return lorentz()


def test_log_integral_lebesgue_is_zero():
    assert ms.szego_log_integral(lebesgue()) == 0.0


def test_log_integral_lorentz(mu_lorentz):
    # (1/π)∫ log(1+x²)/(1+x²) dx = 2 log 2
    assert ms.szego_log_integral(mu_lorentz) == pytest.approx(-2 * math.log(2), abs=1e-6)


def test_log_integral_zero_gap():
    x = np.linspace(-10, 10, 101)
    w = np.where((x >= 0) & (x <= 1), 0.0, 1.0)
    mu = SpectralMeasure("line", x, w, tail=PowerTail(0.0, 1.0))
    assert ms.szego_log_integral(mu) == NEG_INFINITY


def test_poisson_infinite_tail_rejected():
    x = np.linspace(-10, 10, 11)
    mu = SpectralMeasure("line", x, 1 + x**2, tail=PowerTail(2.0, 1.0))
    with pytest.raises(ms.ValidationError):
        ms.szego_log_integral(mu)


def test_halfline_homogeneous_density_finite():
    # the density is held constant below the first sample, so start far down
    lam = np.logspace(-10, 4, 5601)
    sig = SpectralMeasure("halfline", lam, 1 / (math.pi * np.sqrt(lam)), tail=PowerTail(-0.5, 1 / math.pi))
    # ∫ log(1/(π s))/(1+s²) ds over ℝ = -π log π
    assert ms.szego_membership_halfline(sig) == pytest.approx(-math.pi * math.log(math.pi), abs=1e-3)


def test_halfline_constant_density_zero():
    lam = np.linspace(0, 100, 101)
    sig = SpectralMeasure("halfline", lam, np.ones_like(lam), tail=PowerTail(0.0, 1.0))
    # Poisson-infinite on the half-line, so only the log integral is taken
    assert ms._halfline_log_integral(sig) == pytest.approx(0.0, abs=1e-12)


def test_halfline_gap_is_neg_infinity():
    lam = np.linspace(0, 10, 101)
    dens = np.where((lam >= 1) & (lam <= 2), 0.0, 1 / (math.pi * np.sqrt(np.maximum(lam, 1e-3))))
    sig = SpectralMeasure("halfline", lam, dens, tail=PowerTail(-0.5, 1 / math.pi))
    assert ms.szego_membership_halfline(sig) == NEG_INFINITY


def test_outer_function_of_lebesgue_is_one():
    vals = ms.szego_function(lebesgue(), np.array([1j, 2 + 0.5j, -3 + 1e-2j]))
    np.testing.assert_allclose(vals, 1.0, atol=1e-12)


def test_outer_function_lorentz(mu_lorentz):
    # D(z) = i/(z+i) has |D|² = 1/(1+x²) on ℝ and D(i) = 1/2
    for eps in (1e-1, 1e-2, 1e-3):
        assert ms.szego_function(mu_lorentz, 1j * eps) == pytest.approx(1 / (1 + eps), rel=1e-4)
    d = ms.szego_function(mu_lorentz, 1j)
    assert d.real > 0 and abs(d.imag) < 1e-12


def test_boundary_ladder_converges(mu_lorentz):
    out = ms.boundary_ladder(mu_lorentz, np.array([0.0]))
    assert out["diffs"][1] < out["diffs"][0]
    assert abs(out["value"][0]) ** 2 == pytest.approx(1.0, abs=3e-3)


def test_scattering_multiplier(mu_lorentz):
    s = ms.scattering_multiplier(mu_lorentz, np.array([0.0, 1.0, 3.0]))
    np.testing.assert_allclose(np.abs(s), 1.0, atol=1e-12)
    # arg D(x) = arg(i/(x+i)) = atan(x) for the Lorentz density
    np.testing.assert_allclose(np.angle(s), -2 * np.arctan([0.0, 1.0, 3.0]), atol=2e-2)
    assert ms.scattering_multiplier(lebesgue(), np.array([0.5]))[0] == pytest.approx(1.0)


def test_entropy(mu_lorentz):
    # I = 1/2, J = -2 log 2
    assert ms.entropy(mu_lorentz) == pytest.approx(math.log(2), rel=1e-6)
    assert ms.entropy(lebesgue()) == pytest.approx(0.0, abs=1e-6)


def test_entropy_non_szego_raises():
    x = np.linspace(-10, 10, 101)
    mu = SpectralMeasure("line", x, np.where(np.abs(x) < 1, 0.0, 1.0), tail=PowerTail(0.0, 1.0))
    with pytest.raises(ms.DomainError):
        ms.entropy(mu)


def test_string_szego_function_homogeneous():
    lam = np.logspace(-6, 4, 4001)
    sig = SpectralMeasure("halfline", lam, 1 / (math.pi * np.sqrt(lam)), tail=PowerTail(-0.5, 1 / math.pi))
    pts = np.array([1.0, 4.0, 9.0])
    d = ms.string_szego_function(sig, pts, eps=1e-3)
    np.testing.assert_allclose(np.abs(d) ** 2, 1 / (math.pi * np.sqrt(pts)), rtol=1e-4)


def test_string_szego_function_constant_density():
    lam = np.logspace(-6, 4, 4001)
    sig = SpectralMeasure("halfline", lam, np.full_like(lam, 1 / math.pi), tail=PowerTail(0.0, 1 / math.pi))
    d = ms.string_szego_function(sig, np.array([1.0]), eps=1e-3)
    assert abs(d[0]) ** 2 == pytest.approx(1 / math.pi, rel=1e-3)


def test_symmetrize_atoms_and_density():
    lam = np.array([0.0, 1.0, 4.0])
    sig = SpectralMeasure("halfline", lam, np.array([1.0, 1.0, 1.0]), atoms=[(0.0, 1.0), (4.0, 2.0)],
                          tail=PowerTail(0.0, 1.0))
    mu = ms.symmetrize_halfline(sig)
    np.testing.assert_allclose(mu.grid, [-2, -1, 1, 2])
    np.testing.assert_allclose(mu.density, math.pi * np.array([2, 1, 1, 2]))
    assert mu.atoms == ((-2.0, math.pi), (0.0, math.pi), (2.0, math.pi))


def test_json_roundtrip():
    mu = SpectralMeasure("line", [-1.0, 0.0, 2.0], [0.5, 1.0, 0.25], atoms=[(0.5, 0.1)], tail=PowerTail(-2.0, 1.0))
    back = SpectralMeasure.from_json(mu.to_json())
    np.testing.assert_array_equal(back.grid, mu.grid)
    np.testing.assert_array_equal(back.density, mu.density)
    assert back.atoms == mu.atoms and back.tail == mu.tail
    assert json.loads(mu.to_json())["atoms"] == [{"x": 0.5, "m": 0.1}]


@pytest.mark.parametrize("kwargs", [
    dict(support="circle", grid=[0, 1], density=[1, 1]),
    dict(support="line", grid=[0, 0], density=[1, 1]),
    dict(support="line", grid=[0, 1], density=[1, -1]),
    dict(support="halfline", grid=[-1, 1], density=[1, 1]),
    dict(support="line", grid=[0, 1], density=[1, 1], atoms=[(0.5, 0.0)]),
])
def test_invalid_measures(kwargs):
    with pytest.raises(ms.ValidationError):
        SpectralMeasure(**kwargs)


def test_z_outside_upper_half_plane():
    with pytest.raises(ms.ValidationError):
        ms.szego_function(lebesgue(), 1.0 + 0j)
