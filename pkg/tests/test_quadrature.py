import hypothesis.strategies as strat
import numpy as np
import pytest
from hypothesis import given, settings

from core.errors import LabError
from core.quadrature import (QuadratureSpec, circle_directions, decade_rule, dyadic_edges, fibonacci_sphere,
                             gauss_jacobi_left, gauss_legendre, geometric_edges, panel_rule, radial_rule)


@pytest.mark.parametrize("k", range(8))
def test_gauss_legendre_exact_for_polynomials(k):
    t, w = gauss_legendre(4)
    assert w @ t ** k == pytest.approx(1.0 / (k + 1))


@given(strat.floats(min_value=-0.9, max_value=2.0))
@settings(max_examples=30, deadline=None)
def test_gauss_jacobi_weight(beta):
    t, w = gauss_jacobi_left(8, beta)
    assert np.sum(w) == pytest.approx(1.0 / (beta + 1.0), rel=1e-10)
    assert w @ t == pytest.approx(1.0 / (beta + 2.0), rel=1e-10)


def test_panel_rule():
    nodes, weights = panel_rule([0.0, 1.0, 1.0, 3.0], 4)
    assert weights @ nodes ** 2 == pytest.approx(9.0)
    assert np.all(np.diff(nodes) > 0)


def test_geometric_edges_are_graded():
    edges = geometric_edges(0.0, 1.0, "left", levels=5, ratio=0.5)
    assert edges[0] == 0.0 and edges[-1] == 1.0
    assert np.all(np.diff(edges) > 0)
    assert edges[1] == pytest.approx(0.5 ** 5)
    both = geometric_edges(0.0, 2.0, "both", levels=3)
    assert both[0] == 0.0 and both[-1] == 2.0
    assert 1.0 in both


def test_dyadic_edges_cover_interval():
    edges = dyadic_edges(0.25, 8.0, 3)
    assert edges[0] == 0.25 and edges[-1] == pytest.approx(8.0)
    assert len(edges) == 5 * 3 + 1


def test_radial_rule_with_break():
    q = QuadratureSpec(panels_per_dyad=2, gauss_order=8)
    nodes, weights = radial_rule(0.5, 2.0, q, np.array([1.0]))
    assert weights @ np.abs(nodes - 1.0) == pytest.approx(0.625, rel=1e-12)


def test_decade_rule():
    rules = decade_rule(1.0, 6, 8)
    total = sum(w @ t for t, w in rules)
    assert total == pytest.approx(0.5 * (1.0 - 1e-12), rel=1e-10)
    assert rules[0][0].max() < 1.0 and rules[-1][0].min() > 1e-6


def test_sphere_directions_are_unit():
    assert np.allclose(np.linalg.norm(fibonacci_sphere(50), axis=1), 1.0)
    dirs = circle_directions(8)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)
    assert np.allclose(dirs[:4], -dirs[4:])


def test_refined_and_coarsened():
    q = QuadratureSpec()
    fine = q.refined()
    assert fine.panels_per_dyad == 2 * q.panels_per_dyad
    assert fine.gauss_order == q.gauss_order + 4
    assert fine.angular_nodes == 2 * q.angular_nodes
    coarse = QuadratureSpec(panels_per_dyad=1, gauss_order=4, angular_nodes=8).coarsened()
    assert (coarse.panels_per_dyad, coarse.gauss_order, coarse.angular_nodes) == (1, 4, 8)
    assert QuadratureSpec.from_dict(fine.to_dict()) == fine
    assert QuadratureSpec.from_dict(None) == q


@pytest.mark.parametrize("kwargs", [{"inner_cut": 0.0}, {"outer_cut": 0.01}, {"gauss_order": 2},
                                    {"angular_nodes": 2}])
def test_invalid_quadrature(kwargs):
    with pytest.raises(LabError):
        QuadratureSpec(**kwargs)
