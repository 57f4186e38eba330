import numpy as np
import pytest

from core.config import MAX_2D_UNKNOWNS, MAX_GRID_NODES, unknowns_cap
from core.errors import DegenerateMeasure, GridTooLarge, InvalidScenario, UnsupportedOperator
from core.fields import ball_torsion, constant, cos_theta, gaussian, paraboloid_test, zero
from core.geometry import Box
from core.measures import SpectralMeasure, StableOperatorSpec
from core.solver import (DirichletProblem, Grid, classical_harmonic_solve, consistency_check, hat_masses,
                         harmonic_field, poisson_ball_solve, refinement_study, solve, torsion_function,
                         very_weak_residual)


def test_grid_covers_domain_with_margin(interval):
    grid = Grid.for_domain(interval, 0.125)
    assert grid.nodes[0, 0] == pytest.approx(-1.5)
    assert grid.upper[0] == pytest.approx(1.5)
    assert np.all(np.abs(grid.nodes[grid.interior, 0]) < 1.0)
    assert len(grid.interior) == 15
    on, flat = grid.locate([[0.25], [0.3]])
    assert on.tolist() == [True, False]
    assert grid.nodes[flat[0], 0] == pytest.approx(0.25)


def test_one_dimensional_torsion_matches_closed_form(frac1, interval):
    solution = torsion_function(frac1, interval, 1.0 / 128.0)
    idx = solution.nodes_away_from_boundary(8.0)
    exact = ball_torsion(1, 0.5)(solution.grid.nodes[idx])
    assert np.max(np.abs(solution.values[idx] - exact) / exact) < 0.1
    centre = solution.grid.locate([[0.0]])[1][0]
    assert solution.values[centre] == pytest.approx(1.0, rel=0.05)


def test_torsion_is_symmetric_and_positive(frac1, interval):
    solution = torsion_function(frac1, interval, 1.0 / 32.0)
    phi = solution.interior_values
    assert np.all(phi > 0.0)
    assert np.allclose(phi, phi[::-1], atol=1e-8)
    assert solution.residual < 1e-10


def test_constant_exterior_data_is_reproduced(frac2, unit_disc):
    solution = solve(DirichletProblem(frac2, unit_disc, zero(2), constant(1.0, 2), 0.125))
    assert np.allclose(solution.interior_values, 1.0, atol=1e-6)


def test_solve_is_linear(frac1, interval):
    h = 1.0 / 32.0
    f = gaussian(1, [0.2], 0.5)
    g = constant(0.5, 1)
    both = solve(DirichletProblem(frac1, interval, f, g, h)).interior_values
    source = solve(DirichletProblem(frac1, interval, f, zero(1), h)).interior_values
    datum = solve(DirichletProblem(frac1, interval, zero(1), g, h)).interior_values
    assert np.allclose(both, source + datum, atol=1e-10)


def test_axis_operator_solves_on_a_box(axes2):
    box = Box([-1.0, -1.0], [1.0, 1.0])
    solution = torsion_function(axes2, box, 0.125)
    assert np.all(solution.interior_values > 0.0)
    frame = solution.to_frame()
    assert list(frame.columns) == ["x1", "x2", "value", "d_x"]
    assert len(frame) == len(solution.grid.interior)


def test_grid_cap(frac2, unit_disc):
    with pytest.raises(GridTooLarge):
        DirichletProblem(frac2, unit_disc, constant(1.0, 2), zero(2), 0.005)


def test_degenerate_measure_is_refused(unit_disc):
    spec = StableOperatorSpec(0.5, SpectralMeasure(2, (((1.0, 0.0), 1.0), ((-1.0, 0.0), 1.0))))
    with pytest.raises(DegenerateMeasure):
        DirichletProblem(spec, unit_disc, constant(1.0, 2), zero(2), 0.125)


def test_dimension_mismatch(frac1, unit_disc):
    with pytest.raises(InvalidScenario):
        DirichletProblem(frac1, unit_disc, constant(1.0, 2), zero(2), 0.125)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_hat_masses(s):
    full, edge = hat_masses(40, s)
    assert full[0] == 0.0 and edge[0] == 0.0
    assert np.all(full[1:] > 0.0) and np.all(edge[1:] > 0.0)
    assert np.all(full[2:] >= edge[2:])
    # far hats see the kernel at their centre
    assert full[40] == pytest.approx(40.0 ** (-1.0 - 2.0 * s), rel=1e-2)


def test_refinement_study(frac1, interval):
    problem = DirichletProblem(frac1, interval, constant(1.0, 1), zero(1), 1.0 / 16.0)
    frame = refinement_study(problem, levels=3)
    assert list(frame.columns) == ["h", "change", "ratio"]
    assert len(frame) == 2
    assert frame["h"].tolist() == pytest.approx([1.0 / 32.0, 1.0 / 64.0])
    assert np.all(frame["change"] > 0.0)


def test_error_estimate_is_filled(frac1, interval):
    solution = torsion_function(frac1, interval, 1.0 / 32.0, estimate_error=True)
    assert np.isfinite(solution.error_estimate) and solution.error_estimate > 0.0


def test_discrete_solution_as_field(frac1, interval):
    solution = torsion_function(frac1, interval, 1.0 / 32.0)
    u = solution.as_field()
    centre = solution.grid.locate([[0.0]])[1][0]
    assert u.value(0.0) == pytest.approx(solution.values[centre])
    assert u.value(1.5) == 0.0


def test_consistency_check_reports_errors(frac1, interval):
    problem = DirichletProblem(frac1, interval, constant(1.0, 1), zero(1), 1.0 / 32.0)
    report = consistency_check(problem, n_points=2, seed=1)
    assert len(report.points) == 2
    assert all(np.isfinite(e) and e >= 0.0 for e in report.errors)
    assert set(report.to_dict()) == {"h", "error_h", "error_2h", "order"}


def test_poisson_ball_oracle():
    assert poisson_ball_solve(0.5, 1, constant(2.0, 1), 0.3).value == pytest.approx(2.0)
    assert poisson_ball_solve(0.5, 1, zero(1), 0.3).value == 0.0
    with pytest.raises(InvalidScenario):
        poisson_ball_solve(0.5, 1, constant(1.0, 1), 1.2)


def test_classical_harmonic_extension(unit_disc):
    values = classical_harmonic_solve(unit_disc, cos_theta, [[0.3, 0.2], [0.0, -0.5]])
    assert values == pytest.approx([0.3, 0.0], abs=1e-8)
    u = harmonic_field(unit_disc, cos_theta)
    assert u.value([0.3, 0.2]) == pytest.approx(0.3, abs=1e-8)
    assert u.value([2.0, 0.0]) == pytest.approx(1.0)
    with pytest.raises(UnsupportedOperator):
        classical_harmonic_solve(Box([0.0, 0.0], [1.0, 1.0]), cos_theta, [0.5, 0.5])


def test_very_weak_residual(unit_disc):
    ones = lambda z: np.ones(len(z))  # noqa: E731
    phi = paraboloid_test(2)
    report = very_weak_residual(constant(1.0, 2), None, ones, phi, unit_disc)
    assert report.residual <= 1e-8 * report.scale
    wrong = very_weak_residual(constant(2.0, 2), None, ones, phi, unit_disc)
    assert wrong.residual == pytest.approx(4.0 * np.pi, rel=1e-8)
    assert very_weak_residual(constant(1.0, 2), None, ones, zero(2), unit_disc).residual == 0.0


def test_thread_count_does_not_change_the_solution(frac2, unit_disc):
    serial = torsion_function(frac2, unit_disc, 0.125, n_jobs=1)
    threaded = torsion_function(frac2, unit_disc, 0.125, n_jobs=4)
    assert np.max(np.abs(serial.values - threaded.values)) <= 1e-12


def test_one_dimensional_grids_use_the_node_cap(frac1, interval):
    problem = DirichletProblem(frac1, interval, constant(1.0, 1), zero(1), 1.0 / 8192.0)
    assert len(problem.grid.interior) > MAX_2D_UNKNOWNS
    assert unknowns_cap(1) == MAX_GRID_NODES and unknowns_cap(2) == MAX_2D_UNKNOWNS
