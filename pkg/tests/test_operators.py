import numpy as np
import pytest

from core.errors import InsufficientRegularity, PointInsideDomain, SupportViolation
from core.fields import (ball_torsion, bump, capped_linear, constant, distance_power, gaussian, plane_wave,
                         zero)
from core.measures import StableOperatorSpec, fractional_laplacian, SpectralMeasure
from core.operators import (apply_As, apply_As_many, carre_du_champ, gauss_green_residual, normal_derivative,
                            normal_derivative_values, nu_star, scaling_check, tau_s, translation_check)


def _agree(left, right, slack=1e-6):
    return abs(left.value - right.value) <= 3.0 * (left.error + right.error) + slack * max(1.0, abs(right.value))


@pytest.mark.parametrize("s", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("k", [1.0, 2.0])
def test_plane_wave_picks_up_the_symbol_1d(s, k):
    u = plane_wave([k], [0.3])
    value = apply_As(fractional_laplacian(1, s), u, 0.3)
    assert value.value == pytest.approx(k ** (2.0 * s), rel=1e-4)


def test_plane_wave_picks_up_the_symbol_2d(frac2):
    u = plane_wave([1.0, 1.0])
    value = apply_As(frac2, u, [0.0, 0.0])
    assert value.value == pytest.approx(np.sqrt(2.0), rel=5e-4)


def test_constant_is_annihilated(frac2):
    assert apply_As(frac2, constant(3.0, 2), [0.1, 0.2]).value == 0.0


def test_c0_field_is_rejected(frac2, unit_disc):
    with pytest.raises(InsufficientRegularity):
        apply_As(frac2, distance_power(unit_disc, 0.5), [0.2, 0.0])


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_ball_torsion_has_unit_load(s):
    value = apply_As(fractional_laplacian(1, s), ball_torsion(1, s), 0.3)
    assert value.value == pytest.approx(1.0, rel=5e-3)


def test_translation_invariance(frac1):
    u = gaussian(1, [0.1], 0.3)
    moved, still = translation_check(frac1, u, 0.2, [0.45])
    assert _agree(moved, still)


def test_scaling_law(frac1):
    u = gaussian(1, [0.1], 0.3)
    dilated, rescaled = scaling_check(frac1, u, 0.2, 1.7)
    assert _agree(dilated, rescaled)


def test_many_points_keep_order(frac1):
    u = gaussian(1, [0.0], 0.4)
    points = np.array([[-0.3], [0.0], [0.5]])
    many = apply_As_many(frac1, u, points, n_jobs=1)
    assert [e.value for e in many] == [apply_As(frac1, u, p).value for p in points]


def test_carre_du_champ_identity(frac1):
    u = gaussian(1, [0.0], 0.4)
    x = 0.15
    gamma_u = carre_du_champ(frac1, u, x)
    a_square = apply_As(frac1, u.squared(), x)
    a_u = apply_As(frac1, u, x)
    rhs = -a_square.value + 2.0 * u.value(x) * a_u.value
    slack = 3.0 * (gamma_u.error + a_square.error + 2.0 * abs(u.value(x)) * a_u.error) + 1e-6
    assert gamma_u.value == pytest.approx(rhs, abs=slack)


def test_carre_du_champ_of_c0_field_below_one_half():
    spec = fractional_laplacian(1, 0.3)
    assert carre_du_champ(spec, capped_linear(1, 1.0), 0.5).value > 0.0
    with pytest.raises(InsufficientRegularity):
        carre_du_champ(fractional_laplacian(1, 0.6), capped_linear(1, 1.0), 0.5)


def test_tail_weight_follows_axis_lines(axes2, unit_disc, quick_q):
    assert nu_star(axes2, unit_disc, [3.0, 3.0], quick_q) == 0.0
    assert tau_s(axes2, unit_disc, [3.0, 3.0], quick_q) == 0.0
    seen = nu_star(axes2, unit_disc, [1.5, 0.0], quick_q)
    assert seen > 0.0
    assert tau_s(axes2, unit_disc, [1.5, 0.0], quick_q) == pytest.approx(0.5 * 0.5 ** -0.5 + seen)


def test_tail_weight_is_positive_for_the_isotropic_kernel(frac2, unit_disc, quick_q):
    values = nu_star(frac2, unit_disc, np.array([[3.0, 3.0], [1.5, 0.0]]), quick_q)
    assert values.shape == (2,)
    assert np.all(values > 0.0)
    assert values[1] > values[0]


def test_tau_s_rejects_interior_points(frac2, unit_disc):
    with pytest.raises(PointInsideDomain):
        tau_s(frac2, unit_disc, [0.2, 0.0])


def test_normal_derivative(frac1, interval, quick_q):
    values, errors = normal_derivative_values(frac1, interval, constant(1.0, 1), [[1.5], [-2.0]], quick_q)
    assert values.tolist() == [0.0, 0.0] and errors.tolist() == [0.0, 0.0]
    # u vanishes outside, so N_s u is minus the kernel mass of u
    assert normal_derivative(frac1, interval, distance_power(interval, 0.5), 1.5, quick_q).value < 0.0
    with pytest.raises(PointInsideDomain):
        normal_derivative(frac1, interval, constant(1.0, 1), 0.5, quick_q)
    with pytest.raises(PointInsideDomain):
        normal_derivative(frac1, interval, constant(1.0, 1), 1.0, quick_q)


def test_gauss_green_residual_is_small(frac1, interval, quick_q):
    phi = bump(1, [0.0], 0.8)
    w = gaussian(1, [0.3], 0.4)
    report = gauss_green_residual(frac1, interval, phi, w, quick_q, panels=4, order=8, n_jobs=1)
    assert report.scale > 0.0
    assert report.residual <= 1e-2 * report.scale
    assert set(report.terms) == {"T1", "T2", "T3"}


def test_gauss_green_needs_phi_supported_inside(frac1, interval, quick_q):
    with pytest.raises(SupportViolation):
        gauss_green_residual(frac1, interval, gaussian(1, [0.0], 0.5), gaussian(1, [0.3], 0.4), quick_q)
    report = gauss_green_residual(frac1, interval, zero(1), gaussian(1), quick_q)
    assert report.residual == 0.0 and report.scale == 0.0


def test_atomic_measure_operator_is_one_dimensional():
    spec = StableOperatorSpec(0.5, SpectralMeasure(2, (((1.0, 0.0), 1.0), ((-1.0, 0.0), 1.0))))
    u = plane_wave([0.0, 3.0])
    # the kernel only looks along e1, where this wave is constant
    assert apply_As(spec, u, [0.2, 0.1]).value == pytest.approx(0.0, abs=1e-10)
