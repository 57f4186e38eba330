import numpy as np
import pytest
from scipy.special import gamma

from core.errors import InvalidScenario
from core.fields import (C0, COMPACT, VANISHING, ball_torsion, barrier, bump, capped_linear, classical_torsion,
                         constant, cos_theta, cutoff_profile, distance_power, field_from_descriptor, gaussian,
                         optimality_profile, plane_wave, radial_extension, zero)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_one_dimensional_torsion_peak(s):
    u = ball_torsion(1, s)
    assert u.value(0.0) == pytest.approx(1.0 / gamma(2.0 * s + 1.0))
    assert u.value(1.5) == 0.0


def test_torsion_tends_to_classical_profile():
    x = np.array([[0.3, 0.1], [0.0, 0.0]])
    gap = np.abs(ball_torsion(2, 0.999)(x) - classical_torsion(2)(x))
    assert np.all(gap < 5e-3)


def test_constant_fields():
    one = constant(1.0, 2)
    assert one.is_constant and not one.is_zero
    assert constant(0.0, 1).is_zero
    assert zero(3).far_radius() == 0.0


def test_gaussian_laplacian_matches_differences():
    u = gaussian(2, [0.1, -0.2], 0.4, 1.5)
    x = np.array([[0.2, 0.1]])
    step = 1e-4
    fd = sum(u(x + step * e) - 2.0 * u(x) + u(x - step * e) for e in np.eye(2)) / step ** 2
    assert u.laplacian(x)[0] == pytest.approx(fd[0], rel=1e-5)
    assert u.decay == VANISHING
    assert u.value(np.array([0.1, -0.2]) + u.far_radius()) < 1e-15


def test_bump_support():
    u = bump(2, [0.5, 0.0], 0.25)
    assert u.value([0.5, 0.0]) == pytest.approx(1.0)
    assert u.value([0.8, 0.0]) == 0.0
    assert u.decay == COMPACT and u.support_radius == pytest.approx(0.75)


def test_shifted_and_dilated():
    u = gaussian(1, [0.2], 0.3)
    assert u.shifted([0.5]).value(0.7) == pytest.approx(u.value(0.2))
    assert u.dilated(2.0).value(0.1) == pytest.approx(u.value(0.2))
    assert u.dilated(2.0).far_radius() == pytest.approx(0.5 * u.far_radius())


def test_products_and_sums():
    u = gaussian(1, [0.0], 0.5)
    v = bump(1, [0.0], 1.0)
    x = np.array([[0.3]])
    assert u.times(v)(x)[0] == pytest.approx(u(x)[0] * v(x)[0])
    assert u.plus(v)(x)[0] == pytest.approx(u(x)[0] + v(x)[0])
    assert u.times(v).decay == COMPACT
    assert u.squared()(x)[0] == pytest.approx(u(x)[0] ** 2)


def test_plane_wave_values():
    u = plane_wave([2.0, 0.0], [0.5, 0.0])
    assert u.value([0.5, 0.3]) == pytest.approx(1.0)
    assert u.laplacian(np.array([[0.5, 0.0]]))[0] == pytest.approx(-4.0)


def test_cutoff_profile_is_a_smooth_step():
    r = np.array([0.0, 1.5, 1.75, 2.0, 3.0])
    values = cutoff_profile(r, 1.5, 2.0)
    assert values[0] == 1.0 and values[1] == 1.0
    assert values[2] == pytest.approx(0.5)
    assert values[3] == 0.0 and values[4] == 0.0


def test_radial_extension_of_cos_theta():
    u = radial_extension(cos_theta, 2)
    assert u.value([0.0, 1.2]) == pytest.approx(0.0, abs=1e-15)
    assert u.value([1.2, 0.0]) == pytest.approx(1.0)
    assert u.value([2.5, 0.0]) == 0.0


def test_distance_power(unit_disc):
    u = distance_power(unit_disc, 0.5)
    assert u.regularity == C0
    assert u.value([0.75, 0.0]) == pytest.approx(0.5)
    assert u.value([1.5, 0.0]) == 0.0


def test_optimality_profile_lives_on_the_collar(unit_disc):
    u = optimality_profile(unit_disc, 0.5, 0.2)
    assert u.value([1.25, 0.0]) == pytest.approx(0.25 ** -0.3)
    assert u.value([0.5, 0.0]) == 0.0
    assert u.value([2.5, 0.0]) == 0.0


def test_barrier_profile():
    v = barrier(1, [0.0], 0.5, 2.0)
    assert v.value(0.0) == pytest.approx(0.25 ** 2 / 2.0)
    assert v.value(5.0) == pytest.approx(-1.0 / 2.0)


def test_capped_linear():
    u = capped_linear(1, 1.0)
    assert u.value(0.5) == pytest.approx(0.5)
    assert u.value(1.5) == pytest.approx(0.5)
    assert u.value(-3.0) == 0.0


def test_descriptors(unit_disc):
    u = field_from_descriptor({"kind": "bump", "radius": 0.5, "scale": 2.0}, 2)
    assert u.value([0.0, 0.0]) == pytest.approx(2.0)
    assert field_from_descriptor(3.0, 1).constant_value == 3.0
    total = field_from_descriptor({"kind": "sum", "terms": [1.0, {"kind": "gaussian", "sigma": 0.5}]}, 1)
    assert total.value(0.0) == pytest.approx(2.0)
    collar = field_from_descriptor({"kind": "optimality_profile", "eps": 0.3}, 2, 0.5, unit_disc)
    assert collar.value([1.5, 0.0]) == pytest.approx(0.5 ** -0.2)
    with pytest.raises(InvalidScenario):
        field_from_descriptor({"kind": "optimality_profile", "eps": 0.3}, 2)
    with pytest.raises(InvalidScenario):
        field_from_descriptor({"kind": "sawtooth"}, 1)
