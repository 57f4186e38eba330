import hypothesis.strategies as strat
import numpy as np
import pytest
from hypothesis import given, settings

import core.measures as measures
from core.config import ELLIPTICITY_TOLERANCE
from core.errors import DegenerateMeasure, InvalidMeasure, LabError, ZeroFrequency
from core.measures import (SpectralMeasure, StableOperatorSpec, axis_measure, ellipticity_constant,
                           fourier_symbol, fractional_constant, fractional_laplacian, frac_laplacian_measure,
                           measure_report, sphere_area, symmetrize, total_mass)
from core.operators import folded_nodes


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2.0 * np.pi)
    assert sphere_area(3) == pytest.approx(4.0 * np.pi)


def test_fractional_constant_one_half():
    assert fractional_constant(1, 0.5) == pytest.approx(1.0 / np.pi)
    measure = frac_laplacian_measure(1, 0.5)
    assert measure.weights == pytest.approx([1.0 / np.pi, 1.0 / np.pi])


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("s", [0.3, 0.5, 0.8])
def test_fractional_laplacian_symbol(d, s):
    spec = fractional_laplacian(d, s)
    for xi in ([1.0] + [0.0] * (d - 1), [2.0] + [0.0] * (d - 1), [1.0] * d):
        expected = np.linalg.norm(xi) ** (2.0 * s)
        assert fourier_symbol(spec, xi) == pytest.approx(expected, rel=1e-6)


@given(strat.floats(min_value=0.05, max_value=0.95), strat.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=25, deadline=None)
def test_symbol_homogeneity(s, t):
    spec = StableOperatorSpec(s, axis_measure(2, 0.7))
    xi = np.array([0.6, -0.8])
    assert fourier_symbol(spec, t * xi) == pytest.approx(t ** (2.0 * s) * fourier_symbol(spec, xi), rel=1e-12)


def test_symbol_rotation_invariant(rng):
    spec = fractional_laplacian(2, 0.4)
    angles = rng.uniform(0.0, 2.0 * np.pi, 16)
    values = [fourier_symbol(spec, [np.cos(a), np.sin(a)]) for a in angles]
    assert np.allclose(values, values[0], rtol=1e-6)


def test_symbol_at_origin_raises(frac2):
    with pytest.raises(ZeroFrequency):
        fourier_symbol(frac2, [0.0, 0.0])


def test_axis_measure_constants():
    measure = axis_measure(2, 1.5)
    assert total_mass(measure) == pytest.approx(6.0)
    for s in (0.2, 0.5, 0.9):
        assert ellipticity_constant(measure, s) == pytest.approx(3.0, rel=1e-8)


def test_ellipticity_grid_levels_agree():
    for measure in (frac_laplacian_measure(2, 0.5), axis_measure(2, 1.0)):
        value, tolerance = ellipticity_constant(measure, 0.5, with_tolerance=True)
        assert value > 0.0
        assert tolerance <= ELLIPTICITY_TOLERANCE


def test_unconverged_ellipticity_is_logged(monkeypatch):
    seen = []
    monkeypatch.setattr(measures, "ELLIPTICITY_TOLERANCE", -1.0)
    monkeypatch.setattr(measures, "warn", lambda logger, message: seen.append(message))
    measures._ellipticity.cache_clear()
    try:
        ellipticity_constant(axis_measure(2, 1.0), 0.37)
    finally:
        measures._ellipticity.cache_clear()
    assert len(seen) == 1
    assert "s=0.37" in seen[0]


def test_single_pair_is_degenerate():
    pair = SpectralMeasure(2, (((1.0, 0.0), 1.0), ((-1.0, 0.0), 1.0)))
    with pytest.raises(DegenerateMeasure):
        ellipticity_constant(pair, 0.5)


def test_invalid_measures():
    with pytest.raises(InvalidMeasure):
        SpectralMeasure(2, (((1.0, 1.0), 1.0),))
    with pytest.raises(InvalidMeasure):
        SpectralMeasure(2, (((1.0, 0.0), -1.0),))
    with pytest.raises(InvalidMeasure):
        SpectralMeasure(2)


def test_order_outside_unit_interval():
    with pytest.raises(LabError):
        StableOperatorSpec(1.0, axis_measure(1))


@given(strat.floats(min_value=0.0, max_value=2.0 * np.pi), strat.floats(min_value=0.01, max_value=5.0))
@settings(max_examples=30, deadline=None)
def test_symmetrize_preserves_mass(angle, weight):
    measure = SpectralMeasure(2, (((np.cos(angle), np.sin(angle)), weight), ((0.0, 1.0), 1.0)))
    sym = symmetrize(measure)
    assert total_mass(sym) == pytest.approx(total_mass(measure))
    again = symmetrize(sym)
    assert np.allclose(again.weights, sym.weights)
    assert np.allclose(again.directions, sym.directions)


def test_symmetrize_splits_atoms():
    sym = symmetrize(SpectralMeasure(1, (((1.0,), 2.0),)))
    assert sorted(sym.weights) == [1.0, 1.0]
    assert sorted(sym.directions[:, 0]) == [-1.0, 1.0]


@pytest.mark.parametrize("spec", [fractional_laplacian(2, 0.5), StableOperatorSpec(0.3, axis_measure(2, 2.0)),
                                  fractional_laplacian(1, 0.7)])
def test_folded_weights_carry_total_mass(spec):
    dirs, weights = folded_nodes(spec, 64)
    assert np.sum(weights) == pytest.approx(total_mass(spec.measure))
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)


def test_with_s_renormalizes_fractional_laplacian():
    spec = fractional_laplacian(2, 0.3).with_s(0.7)
    assert spec.measure == frac_laplacian_measure(2, 0.7)
    axes = StableOperatorSpec(0.3, axis_measure(2)).with_s(0.7)
    assert axes.measure == axis_measure(2)


def test_spec_from_dict():
    spec = StableOperatorSpec.from_dict({"measure": {"kind": "fractional_laplacian", "d": 2}}, 0.6)
    assert spec.label == "fractional_laplacian"
    assert spec.s == 0.6
    axes = StableOperatorSpec.from_dict({"measure": {"kind": "axes", "d": 2, "weight": 2.0}}, 0.4)
    assert axes.measure.is_axis_atomic()
    assert total_mass(axes.measure) == pytest.approx(8.0)
    atoms = StableOperatorSpec.from_dict({"s": 0.5, "measure": {"d": 1, "atoms": [[[1.0], 1.0]]}})
    assert atoms.measure.weights.tolist() == [1.0]
    with pytest.raises(InvalidMeasure):
        SpectralMeasure.from_dict({"kind": "cauchy", "d": 2})


def test_measure_report():
    report = measure_report(fractional_laplacian(2, 0.5))
    assert report["Lambda"] == pytest.approx(2.0 * np.pi * report["uniform_density"])
    assert report["lambda"] > 0
    degenerate = StableOperatorSpec(0.5, SpectralMeasure(2, (((0.0, 1.0), 1.0),)))
    assert measure_report(degenerate)["lambda"] == 0.0
