"""Tests for the geometric function, Whitney covers, the partition of unity,
the extension across bad zones and the cut set."""

import numpy as np
import pytest

from conelab.crack import CrackSet
from conelab.flatness import BadBallFamily
from conelab.geometry_core import Ball, make_cone
from conelab.harmonic import ScalarField, discretize, minimize_energy
from conelab.whitney import (
    WhitneyCover,
    build_cut_set,
    build_delta,
    build_extension,
    c1_inflation,
    check_cover,
    check_hypothesis_h,
    energy_comparison,
    evaluate_partition,
    neighborhood_mask,
    partition_matrix,
    ramp,
    select_whitney_balls,
)

DOMAIN = Ball(np.zeros(2), 0.9)


@pytest.fixture
def line_delta(line_cone):
    return build_delta(BadBallFamily.empty(), 0.625, 0.25, line_cone, dimension=2, n_pairs=2000)


@pytest.fixture
def line_cover(line_crack, line_delta):
    return select_whitney_balls(line_crack, line_delta, 30.0, DOMAIN)


def test_ramp():
    np.testing.assert_allclose(ramp([0.0, 8.0, 9.0, 10.0, 50.0]), [0.0, 0.0, 0.5, 1.0, 1.0])
    t = np.linspace(7.5, 10.5, 61)
    assert np.all(np.diff(ramp(t)) >= 0)


# ============================================================================
# Geometric Function
# ============================================================================

def test_build_delta_validation(line_cone):
    empty = BadBallFamily.empty()
    with pytest.raises(ValueError):
        build_delta(empty, 0.625, 0.3, line_cone, dimension=2)
    with pytest.raises(ValueError):
        build_delta(empty, 1.5, 0.1, line_cone, dimension=2)
    outside = BadBallFamily(np.array([[0.95, 0.0, 0.0]]), np.array([0.1]))
    with pytest.raises(ValueError):
        build_delta(outside, 0.625, 0.1, line_cone, dimension=2)
    with pytest.raises(ValueError):
        build_delta(empty, 0.625, 0.1, make_cone("P", center=[0.0, 0.2, 0.0]), dimension=2)


def test_delta_values_near_the_line(line_cone):
    delta = build_delta(BadBallFamily.empty(), 0.625, 0.1, line_cone, dimension=2, n_pairs=2000)
    np.testing.assert_allclose(delta([[0.0, 0.0], [0.0, 0.1], [0.2, -0.3]]), [0.1, 0.0, 0.2], atol=1e-12)
    # past rho the distance is to the end of the skeleton segment
    assert delta([[0.9, 0.0]])[0] == pytest.approx(0.175)
    assert delta([[0.9, 0.3]])[0] == pytest.approx(np.hypot(0.275, 0.3) - 0.1)


def test_delta_bump_dominates_inside_bad_ball(line_cone):
    bad = BadBallFamily(np.array([[0.2, 0.0, 0.0]]), np.array([0.05]))
    delta = build_delta(bad, 0.625, 0.02, line_cone, dimension=2, n_pairs=2000)
    assert delta([[0.2, 0.0]])[0] == pytest.approx(0.05)
    assert delta.bump_sum([[0.2, 0.1]])[0] == 0.0


def test_delta_is_one_lipschitz(line_delta):
    assert line_delta.lipschitz_constant == pytest.approx(1.0, abs=1e-6)


# ============================================================================
# Cover
# ============================================================================

def test_select_rejects_small_U(line_crack, line_delta):
    with pytest.raises(ValueError):
        select_whitney_balls(line_crack, line_delta, 10.0, DOMAIN)


def test_cover_satisfies_its_clauses(line_crack, line_cover):
    assert len(line_cover) > 10
    assert all(cone is not None for cone in line_cover.cones)
    report = check_cover(line_cover, line_crack, n_probe=500, overlap_bound=12)
    assert report.passed, report.violations
    assert report.values["overlap"] >= 1


def test_cover_radii_follow_delta(line_cover, line_delta):
    np.testing.assert_allclose(line_cover.base_radii, line_delta(line_cover.centers) / 30.0)


def test_cover_csv(tmp_path, line_cover):
    path = tmp_path / "cover.csv"
    line_cover.to_csv(path)
    assert path.read_text().splitlines()[0] == "x,y,z,r,cone_type"
    back = WhitneyCover.from_csv(path, dimension=2)
    np.testing.assert_array_equal(back.centers, line_cover.centers)
    np.testing.assert_array_equal(back.radii, line_cover.radii)


# ============================================================================
# Partition of Unity
# ============================================================================

def test_partition_sums_to_one(line_cover):
    rng = np.random.default_rng(3)
    pts = np.column_stack([rng.uniform(-0.9, 0.9, 400), rng.uniform(-0.1, 0.1, 400)])
    values = partition_matrix(line_cover, pts)
    sums = values.theta0 + np.asarray(values.theta.sum(axis=1)).ravel()
    np.testing.assert_allclose(sums, 1.0, atol=1e-12)
    assert np.all(values.total >= 1.0 - 1e-12)


def test_partition_away_from_the_crack(line_cover):
    phi0, weights = evaluate_partition(line_cover, [0.0, 0.5])
    assert phi0 == 1.0
    assert weights == {}


def test_partition_at_a_center(line_cover):
    j = len(line_cover) // 2
    phi0, weights = evaluate_partition(line_cover, line_cover.centers[j])
    assert phi0 == 0.0
    assert j in weights
    assert sum(weights.values()) == pytest.approx(1.0)


# ============================================================================
# Extension and Energy
# ============================================================================

@pytest.fixture
def line_field(line_crack):
    graph = discretize(line_crack, 64)
    return minimize_energy(graph, lambda p: p[:, 0] + p[:, 1])


def test_extension_is_a_convex_combination(line_field, line_cover):
    graph = line_field.graph
    k = int(graph.components[graph.locate([[0.0, 0.5]])[0]])
    ext = build_extension(line_field, line_cover, k)
    assert np.any(~np.isnan(ext.means))
    v = ext.values()
    u = line_field.values
    assert np.all(v >= u.min() - 1e-12)
    assert np.all(v <= u.max() + 1e-12)

    far = np.abs(graph.positions[:, 1]) > 0.3
    np.testing.assert_allclose(v[far], u[far])
    np.testing.assert_allclose(ext(graph.positions[far][:5]), u[far][:5])


def test_extension_component_range(line_field, line_cover):
    with pytest.raises(ValueError):
        build_extension(line_field, line_cover, line_field.graph.n_components)


def test_energy_comparison(line_field, line_cover):
    graph = line_field.graph
    k = int(graph.components[graph.locate([[0.0, 0.5]])[0]])
    ext = build_extension(line_field, line_cover, k)
    result = energy_comparison(line_field, ext, line_cover, k, 0.625)
    lhs, main, zone, constant = result.as_tuple()
    assert lhs > 0 and main > 0 and zone >= 0
    assert constant >= 0
    with pytest.raises(ValueError):
        energy_comparison(line_field, ext, line_cover, 1 - k, 0.625)


def test_extension_shifts_with_a_constant(line_field, line_cover):
    graph = line_field.graph
    k = int(graph.components[graph.locate([[0.0, 0.5]])[0]])
    ext = build_extension(line_field, line_cover, k)
    shifted = build_extension(ScalarField(graph, line_field.values + 3.5), line_cover, k)
    np.testing.assert_array_equal(np.isnan(shifted.means), np.isnan(ext.means))
    active = ~np.isnan(ext.means)
    np.testing.assert_allclose(shifted.means[active], ext.means[active] + 3.5, atol=1e-12)
    np.testing.assert_allclose(shifted.values(), ext.values() + 3.5, atol=1e-12)


def test_anchor_segments_clear_the_crack(line_field, line_cover, line_crack):
    graph = line_field.graph
    k = int(graph.components[graph.locate([[0.0, 0.5]])[0]])
    ext = build_extension(line_field, line_cover, k)
    anchors = ext.anchors[~np.isnan(ext.means)]
    assert len(anchors) > 1
    starts = np.repeat(anchors, len(anchors), axis=0)
    ends = np.tile(anchors, (len(anchors), 1))
    assert not line_crack.segment_hits(starts, ends).any()
    # anchors of one component never see the other side through the crack
    below = graph.positions[graph.locate([[0.0, -0.5]])[0]]
    assert line_crack.segment_hits(anchors, np.tile(below, (len(anchors), 1))).all()


# ============================================================================
# Cut Set
# ============================================================================

def test_c1_inflation():
    assert c1_inflation(BadBallFamily.empty(), 30.0, 1.0) == pytest.approx(2.0 + 1.0 / 3.0)
    with pytest.raises(ValueError):
        c1_inflation(BadBallFamily.empty(), 0.0, 1.0)


def test_cut_set_replaces_balls_on_the_sphere(line_crack):
    bad = BadBallFamily.build(line_crack, [[0.6, 0.0]], [0.05])
    cut = build_cut_set(line_crack, bad, 0.625, 30.0, 1.0)
    radius = c1_inflation(bad, 30.0, 1.0) * 0.05
    assert cut.distance([[0.6, 0.0]])[0] == pytest.approx(radius, rel=0.01)
    assert cut.distance([[0.0, 0.0]])[0] == 0.0


def test_cut_set_untouched_without_sphere_balls(line_crack):
    bad = BadBallFamily.build(line_crack, [[0.1, 0.0]], [0.02])
    assert build_cut_set(line_crack, bad, 0.625, 30.0, 1.0) is line_crack
    with pytest.raises(ValueError):
        build_cut_set(line_crack, bad, 0.9, 30.0, 1.0)


def test_empty_cover_partition():
    cover = WhitneyCover(np.zeros((0, 2)), np.zeros(0), np.zeros(0), 30.0, DOMAIN)
    values = partition_matrix(cover, [[0.1, 0.2]])
    assert values.phi0[0] == 1.0
    assert values.theta.shape == (1, 0)


def test_neighborhood_mask(line_crack, line_delta):
    y = line_crack.samples[np.argmin(np.abs(line_crack.samples[:, 0] - 0.1))]
    pts = [y + [0.0, 0.005], y + [0.0, 0.05], [0.8, 0.002]]
    assert list(neighborhood_mask(pts, line_crack, line_delta, 30.0, 1.0, rho=0.625)) == [True, False, False]
    assert not neighborhood_mask(np.zeros((0, 2)), line_crack, line_delta, 30.0, 1.0).any()


def test_hypothesis_h_on_a_plane(plane_crack, plane_cone):
    delta = build_delta(BadBallFamily.empty(), 0.625, 0.1, plane_cone, n_pairs=500)
    report = check_hypothesis_h(plane_crack, delta, 0.05, n_points=3, n_starts=2)
    assert sorted({round(rec.r, 9) for rec in report.records}) == [0.1, 0.2]
    assert report.passed
    with pytest.raises(ValueError):
        check_hypothesis_h(CrackSet.empty(2), delta, 0.05)
