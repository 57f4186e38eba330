import hypothesis.strategies as strat
import numpy as np
import pytest
from hypothesis import given, settings

from core.errors import LabError, TailUnknown
from core.fields import bump, constant, cos_theta, gaussian, zero
from core.geometry import Interval
from core.norms import (MONTE_CARLO, boundary_L2, decade_classification, exterior_gaps, exterior_L2_tau,
                        gagliardo, l2_distance, l2_norm, mu_energy, sobolev_weight_ratio, transmission_energy,
                        weighted_energy, weighted_L2)


def test_l2_norms(interval, unit_disc):
    assert l2_norm(constant(1.0, 1), interval) == pytest.approx(np.sqrt(2.0))
    assert l2_norm(constant(1.0, 2), unit_disc) == pytest.approx(np.sqrt(np.pi), rel=1e-10)
    u = gaussian(2, [0.1, 0.0], 0.3)
    assert l2_distance(u, u, unit_disc) == 0.0
    assert l2_distance(u, zero(2), unit_disc) == pytest.approx(l2_norm(u, unit_disc))


def test_boundary_l2(interval, unit_disc):
    assert boundary_L2(cos_theta, unit_disc) == pytest.approx(np.pi, rel=1e-10)
    assert boundary_L2(lambda z: np.ones(len(z)), interval) == pytest.approx(2.0)


def test_gagliardo_of_constant_is_zero(interval):
    report = gagliardo(constant(2.0, 1), interval, 0.5)
    assert report.value == 0.0 and not report.divergent


@pytest.mark.parametrize("t", [0.0, 1.0, -0.2])
def test_gagliardo_order_range(interval, t):
    with pytest.raises(LabError):
        gagliardo(gaussian(1), interval, t)


def test_gagliardo_unknown_method(interval):
    with pytest.raises(LabError):
        gagliardo(gaussian(1), interval, 0.5, method="sparse")


@given(strat.floats(min_value=0.1, max_value=5.0))
@settings(max_examples=10, deadline=None)
def test_gagliardo_is_quadratic(c):
    interval = Interval(-1.0, 1.0)
    base = gagliardo(gaussian(1, [0.0], 0.4), interval, 0.4, cells=128)
    scaled = gagliardo(gaussian(1, [0.0], 0.4, amplitude=c), interval, 0.4, cells=128)
    assert scaled.value == pytest.approx(c ** 2 * base.value, rel=1e-9)


def test_gagliardo_settles_for_smooth_fields(interval):
    report = gagliardo(gaussian(1, [0.0], 0.4), interval, 0.5, True)
    assert report.value > 0.0
    assert not report.divergent
    assert report.error_estimate < 0.1 * report.value


def test_monte_carlo_agrees_with_grid(unit_disc):
    u = gaussian(2, [0.2, 0.0], 0.5)
    grid = gagliardo(u, unit_disc, 0.3)
    sampled = gagliardo(u, unit_disc, 0.3, method=MONTE_CARLO, samples=200_000, seed=7)
    assert sampled.value == pytest.approx(grid.value, abs=5.0 * sampled.error_estimate + 0.08 * grid.value)


def test_weighted_energy_is_below_plain_energy(interval):
    u = gaussian(1, [0.0], 0.4)
    plain = gagliardo(u, interval, 0.5, True, cells=128)
    weighted = weighted_energy(u, interval, 0.5, cells=128)
    # the weight (d_x ^ d_y)^s never exceeds one on the interval
    assert 0.0 < weighted.value < plain.value


def test_sobolev_weight_ratio_is_finite(interval):
    ratio = sobolev_weight_ratio(gaussian(1, [0.0], 0.4), interval, 0.5, cells=128)
    assert np.isfinite(ratio) and ratio > 0.0


def test_mu_energy_matches_gagliardo_on_the_line(frac1, interval):
    u = gaussian(1, [0.0], 0.4)
    chord = mu_energy(frac1, u, interval, 0.0)
    grid = gagliardo(u, interval, 0.5, True)
    # two atoms of mass 1/pi at s = 1/2
    assert chord.value == pytest.approx(2.0 / np.pi * grid.value, rel=5e-2)
    assert mu_energy(frac1, constant(1.0, 1), interval, 0.5).value == 0.0


def test_weighted_l2_constant(interval, unit_disc):
    assert weighted_L2(constant(1.0, 1), interval, 0.0).value == pytest.approx(2.0, rel=1e-8)
    assert weighted_L2(constant(1.0, 2), unit_disc, 0.0).value == pytest.approx(np.pi, rel=1e-8)


def test_weighted_l2_detects_divergence(interval):
    report = weighted_L2(constant(1.0, 1), interval, -1.5)
    assert report.divergent and report.value == float("inf")
    assert not weighted_L2(constant(1.0, 1), interval, -0.5).divergent


def test_exterior_norm(frac1, interval):
    assert exterior_L2_tau(frac1, zero(1), interval).value == 0.0
    with pytest.raises(TailUnknown):
        exterior_L2_tau(frac1, constant(1.0, 1), interval)
    report = exterior_L2_tau(frac1, bump(1, [2.0], 0.5), interval)
    assert 0.0 < report.value < float("inf") and not report.divergent


def test_exterior_norm_of_data_up_to_the_boundary(frac1, interval):
    # tau ~ d^-s is integrable against bounded data for s < 1
    report = exterior_L2_tau(frac1, bump(1, [1.5], 0.75), interval)
    assert not report.divergent
    assert report.value > 0.0


def test_decade_classification():
    assert decade_classification([1.0, 0.5]) == (False, 0.0)
    divergent, tail = decade_classification([1.0, 0.1, 0.01])
    assert not divergent and tail == pytest.approx(0.01 * 0.1 / 0.9)
    assert decade_classification([1.0, 2.0, 4.0]) == (True, float("inf"))
    assert decade_classification([0.0, 0.0, 0.0]) == (False, 0.0)


def test_exterior_gaps():
    pieces = [(np.array([0.5]), np.array([1.0])), (np.array([2.0]), np.array([3.0]))]
    (a, b), (c, e) = exterior_gaps(pieces)
    assert (a[0], b[0]) == (1.0, 2.0)
    assert c[0] == 3.0 and np.isinf(e[0])
    (only,) = exterior_gaps([(np.array([-1.0]), np.array([1.0]))])
    assert only[0][0] == 1.0 and np.isinf(only[1][0])


def test_transmission_energy(frac1, interval):
    matched = transmission_energy(frac1, constant(1.0, 1), constant(1.0, 1), interval)
    assert matched.value == pytest.approx(0.0, abs=1e-12)
    jump = transmission_energy(frac1, zero(1), bump(1, [2.0], 0.5), interval)
    assert jump.value > 0.0


def test_exterior_gaps_with_a_ray_missing_the_hole(lshape):
    points = np.array([[1.9, -1.0], [-1.0, 0.5]])
    (a, b), (c, e) = exterior_gaps(lshape.chords(points, np.array([1.0, 0.0])))
    assert np.isinf(a[0]) and np.isinf(b[0])
    assert (a[1], b[1]) == pytest.approx((1.0, 2.0))
    assert c == pytest.approx([0.1, 3.0])
    assert np.isinf(e).all()


def test_transmission_energy_on_lshape(axes2, lshape):
    matched = transmission_energy(axes2, constant(1.0, 2), constant(1.0, 2), lshape, panels=2, order=4)
    assert matched.value == pytest.approx(0.0, abs=1e-12)
    jump = transmission_energy(axes2, constant(1.0, 2), zero(2), lshape, panels=2, order=4)
    assert np.isfinite(jump.value) and jump.value > 0.0
    assert np.isfinite(jump.error_estimate)
