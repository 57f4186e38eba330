import hypothesis.strategies as strat
import numpy as np
import pytest
from hypothesis import given, settings

from core.errors import InvalidDomain
from core.geometry import (Ball, Box, Interval, LShape, as_points, dist_to_boundary, domain_from_dict,
                           sample_inside, whitney_cover)


def test_as_points_shapes():
    assert as_points(0.5, 1).shape == (1, 1)
    assert as_points([0.1, 0.2, 0.3], 1).shape == (3, 1)
    assert as_points([0.1, 0.2], 2).shape == (1, 2)


def test_interval_distance(interval):
    inside, d, z = dist_to_boundary(interval, 0.25)
    assert inside and d == pytest.approx(0.75) and z[0] == pytest.approx(1.0)
    inside, d, z = dist_to_boundary(interval, -1.5)
    assert not inside and d == pytest.approx(0.5) and z[0] == pytest.approx(-1.0)
    assert dist_to_boundary(interval, 1.0)[1] == 0.0


def test_box_tie_break_is_lexicographic():
    box = Box([-1.0, -1.0], [1.0, 1.0])
    inside, d, z = dist_to_boundary(box, [0.0, 0.0])
    assert inside and d == pytest.approx(1.0)
    assert z.tolist() == [-1.0, 0.0]


def test_ball_distance_and_normals(unit_disc):
    inside, d, z = dist_to_boundary(unit_disc, [0.3, 0.4])
    assert inside and d == pytest.approx(0.5)
    assert np.allclose(z, [0.6, 0.8])
    _, _, z = dist_to_boundary(unit_disc, [0.0, 0.0])
    assert z.tolist() == [-1.0, 0.0]
    boundary, _ = unit_disc.boundary_nodes(16)
    assert np.allclose(unit_disc.outward_normals(boundary), boundary, atol=1e-6)


def test_lshape_distance(lshape):
    assert lshape.dist([-0.5, -0.5])[0] == pytest.approx(np.sqrt(0.5))
    assert lshape.dist([0.5, -0.5])[0] == pytest.approx(0.5)
    assert not lshape.contains([0.5, 0.5])[0]
    assert lshape.contains([1.5, 0.5])[0]
    assert lshape.volume == pytest.approx(15.0)
    assert lshape.perimeter == pytest.approx(20.0)


def test_lshape_axis_chords_miss_removed_box(lshape):
    for t in (0.1, 0.25, 0.4):
        x = np.array([-t, -t])
        for theta in ([1.0, 0.0], [0.0, 1.0]):
            pieces = lshape.ray_chords(x, theta)
            # the axis lines through (-t, -t) never enter the removed square
            assert len(pieces) == 1
            r0, r1 = pieces[0]
            assert r0 == pytest.approx(-2.0 + t) and r1 == pytest.approx(2.0 + t)


def test_lshape_diagonal_chord_splits(lshape):
    pieces = lshape.ray_chords([-0.5, -0.5], np.array([1.0, 1.0]) / np.sqrt(2.0))
    assert len(pieces) == 2
    assert pieces[0][1] == pytest.approx(0.5 * np.sqrt(2.0))


def test_ball_chords(unit_disc):
    r0, r1 = unit_disc.ray_chords([0.0, 0.0], [1.0, 0.0])[0]
    assert (r0, r1) == (pytest.approx(-1.0), pytest.approx(1.0))
    assert unit_disc.ray_chords([3.0, 3.0], [1.0, 0.0]) == []


@pytest.mark.parametrize("t", [0.05, 0.3])
@pytest.mark.parametrize("side", ["inside", "outside"])
def test_level_sets_sit_at_distance(lshape, unit_disc, t, side):
    for domain in (lshape, unit_disc):
        points, weights = domain.level_set_nodes(t, side, 128)
        assert len(points)
        inside, d, _ = domain.distance(points)
        assert np.allclose(d, t, atol=1e-9)
        assert np.all(inside == (side == "inside"))
        assert np.all(weights > 0)


def test_interval_level_set(interval):
    points, weights = interval.level_set_nodes(0.25, "inside")
    assert points[:, 0].tolist() == [-0.75, 0.75]
    assert weights.tolist() == [1.0, 1.0]
    points, _ = interval.level_set_nodes(2.0, "inside")
    assert len(points) == 0


def test_disc_level_set_length(unit_disc):
    _, weights = unit_disc.level_set_nodes(0.5, "outside", 256)
    assert np.sum(weights) == pytest.approx(2.0 * np.pi * 1.5)


@given(strat.floats(min_value=-3.0, max_value=3.0), strat.floats(min_value=-3.0, max_value=3.0))
@settings(max_examples=50, deadline=None)
def test_lshape_distance_against_brute_force(x, y):
    domain = LShape(Box([-2.0, -2.0], [2.0, 2.0]), Box([0.0, 0.0], [1.0, 1.0]))
    boundary, _ = domain.boundary_nodes(20_000)
    brute = float(np.min(np.linalg.norm(boundary - np.array([x, y]), axis=1)))
    assert domain.dist([x, y])[0] == pytest.approx(brute, abs=2e-3)


def test_volume_nodes(unit_disc, lshape, interval):
    _, w = unit_disc.volume_nodes(4, 6)
    assert np.sum(w) == pytest.approx(np.pi, rel=1e-10)
    _, w = lshape.volume_nodes(2, 4)
    assert np.sum(w) == pytest.approx(15.0)
    _, w = interval.volume_nodes(2, 4)
    assert np.sum(w) == pytest.approx(2.0)


def test_exterior_nodes_measure_complement(lshape):
    _, w = lshape.exterior_nodes(3.0, 2, 4)
    assert np.sum(w) == pytest.approx(36.0 - 15.0)


def test_collar_membership(unit_disc):
    points = np.array([[1.5, 0.0], [2.5, 0.0], [0.5, 0.0]])
    assert unit_disc.collar_contains(points).tolist() == [True, False, False]


def test_domain_from_dict(lshape):
    assert isinstance(domain_from_dict({"variant": "interval", "a": -1, "b": 1}), Interval)
    assert isinstance(domain_from_dict({"variant": "ball", "center": [0, 0], "radius": 1}), Ball)
    rebuilt = domain_from_dict(lshape.to_dict())
    assert rebuilt.volume == pytest.approx(lshape.volume)
    with pytest.raises(InvalidDomain):
        domain_from_dict({"variant": "torus"})
    with pytest.raises(KeyError):
        domain_from_dict({"variant": "ball", "radius": 1})


def test_invalid_domains():
    with pytest.raises(InvalidDomain):
        Interval(1.0, -1.0)
    with pytest.raises(InvalidDomain):
        Ball([0.0], 0.0)
    with pytest.raises(InvalidDomain):
        LShape(Box([0.0, 0.0], [1.0, 1.0]), Box([0.0, 0.0], [1.0, 1.0]))


def test_sample_inside_is_seeded(lshape):
    first = sample_inside(lshape, 200, seed=5)
    assert np.all(lshape.contains(first))
    assert np.array_equal(first, sample_inside(lshape, 200, seed=5))


@pytest.mark.parametrize("domain", [Box([0.0, 0.0], [1.0, 1.0]), Ball([0.0, 0.0], 1.0),
                                    LShape(Box([-2.0, -2.0], [2.0, 2.0]), Box([0.0, 0.0], [1.0, 1.0]))])
def test_whitney_invariant(domain):
    cover = whitney_cover(domain, 0.05, samples=2000, seed=3)
    dist = domain.dist(cover.centers)
    assert np.all(dist >= 2.0 * cover.radii - 1e-12)
    assert np.all(dist <= 4.0 * cover.radii + 1e-12)
    assert 0 < cover.overlap_bound <= 20
    deep = sample_inside(domain, 500, seed=4)
    deep = deep[domain.dist(deep) > 0.4]
    assert cover.covers(deep).all()


def test_whitney_needs_positive_radius(unit_disc):
    with pytest.raises(InvalidDomain):
        whitney_cover(unit_disc, 0.0)
