"""Tests for cone construction, distances, regions, recentering and separation."""

import math

import numpy as np
import pytest

from conelab.crack import punch_hole
from conelab.errors import GeometryError, OrientationError, ResolutionError, SeparationError
from conelab.geometry_core import (
    TETRA_VERTICES,
    Ball,
    ConeType,
    closest_point,
    cone_distance,
    cone_from_json,
    cone_region,
    cone_to_json,
    cone_triangles,
    frame_with_normal,
    is_almost_centered,
    is_separating,
    label_regions,
    make_cone,
    orientation_map,
    recenter,
)
from conelab.rng import make_rng


def test_cone_type_parse():
    assert ConeType.parse("y") is ConeType.Y
    assert ConeType.parse(3) is ConeType.T
    with pytest.raises(GeometryError):
        ConeType.parse("Q")


def test_make_cone_rejects_skewed_rotation():
    R = np.eye(3)
    R[0, 1] = 1e-6
    with pytest.raises(GeometryError):
        make_cone("Y", rotation=R)


def test_plane_distance(plane_cone):
    assert plane_cone.distance([0.3, 0.5, -0.2]) == pytest.approx(0.5)


def test_y_distance_opposite_a_sheet(y_cone):
    # 60 degrees from the two nearest sheets
    assert y_cone.distance([-1.0, 0.0, 0.7]) == pytest.approx(math.sqrt(3) / 2)
    assert y_cone.distance([0.4, 0.0, -3.0]) == pytest.approx(0.0)


def test_t_distance_on_a_face(t_cone):
    p = 0.3 * (TETRA_VERTICES[0] + TETRA_VERTICES[1])
    assert t_cone.distance(p) == pytest.approx(0.0, abs=1e-12)
    assert t_cone.distance(np.zeros(3)) == 0.0


@pytest.mark.parametrize("kind", ["P", "Y", "T"])
def test_closest_point_realizes_distance(kind):
    rng = make_rng(1, "closest")
    from scipy.spatial.transform import Rotation

    cone = make_cone(kind, rng.normal(size=3) * 0.1, Rotation.random(random_state=2).as_matrix())
    pts = rng.normal(size=(200, 3))
    foot = closest_point(cone, pts)
    np.testing.assert_allclose(cone.distance(foot), 0.0, atol=1e-10)
    np.testing.assert_allclose(np.linalg.norm(pts - foot, axis=1), cone.distance(pts), atol=1e-10)


def test_cone_region_labels(plane_cone, y_cone, t_cone):
    assert list(cone_region(plane_cone, [[0, 0.5, 0], [0, -0.5, 0]])) == [0, 1]
    angles = np.radians([60.0, 180.0, 300.0])
    pts = np.column_stack([np.cos(angles), np.sin(angles), np.zeros(3)])
    assert list(cone_region(y_cone, pts)) == [0, 1, 2]
    assert list(cone_region(t_cone, -TETRA_VERTICES)) == [0, 1, 2, 3]


def test_is_almost_centered(y_cone):
    assert is_almost_centered(y_cone, Ball([0.3, 0.0, 0.5], 1.0))
    assert not is_almost_centered(y_cone, Ball([0.6, 0.0, 0.0], 1.0))


def test_cone_json(t_cone):
    text = cone_to_json(t_cone)
    back = cone_from_json(text)
    assert back.cone_type is ConeType.T
    np.testing.assert_array_equal(back.rotation, t_cone.rotation)
    with pytest.raises(GeometryError):
        cone_from_json("{not json")


def test_frame_with_normal():
    n = np.array([1.0, 2.0, 2.0]) / 3.0
    R = frame_with_normal(n)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(R[:, 1], n)
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_cone_triangles_lie_on_cone(y_cone, unit_ball):
    tris = cone_triangles(y_cone, unit_ball, 0.1)
    assert len(tris) > 0
    np.testing.assert_allclose(y_cone.distance(tris.reshape(-1, 3)), 0.0, atol=1e-12)


def test_recenter_far_from_spine_gives_plane(y_cone):
    r1, cone = recenter(y_cone, [0.5, 0.0, 0.0], 0.1)
    assert r1 == pytest.approx(0.1)
    assert cone.cone_type is ConeType.P


def test_recenter_near_spine_gives_y(y_cone):
    r1, cone = recenter(y_cone, [0.04, 0.0, 0.0], 0.1)
    assert cone.cone_type is ConeType.Y
    assert is_almost_centered(cone, Ball([0.04, 0.0, 0.0], r1))


def test_recenter_requires_point_on_cone(y_cone):
    with pytest.raises(GeometryError):
        recenter(y_cone, [-0.5, 0.0, 0.0], 0.1)


def test_label_regions_counts_y_sectors(y_cone, unit_ball):
    labels = label_regions(y_cone, unit_ball, 0.05, 96)
    assert labels.count == 3
    assert sorted(labels.regions.values()) == [0, 1, 2]


def test_label_regions_needs_fine_grid(y_cone, unit_ball):
    with pytest.raises(ResolutionError):
        label_regions(y_cone, unit_ball, 0.05, 32)


def test_exact_y_crack_separates(y_crack, y_cone, unit_ball):
    assert is_separating(y_crack, y_cone, unit_ball, 0.1, resolution=48)


def test_holed_crack_does_not_separate(y_crack, y_cone, unit_ball):
    holed = punch_hole(y_crack, [0.5, 0.0, 0.0], 0.3)
    assert not is_separating(holed, y_cone, unit_ball, 0.1, resolution=48)


def test_crack_outside_slab(plane_crack, y_cone, unit_ball):
    with pytest.raises(SeparationError):
        is_separating(plane_crack, y_cone, unit_ball, 0.1)


def test_orientation_identity_for_same_cone(y_crack, y_cone):
    mapping = orientation_map(
        y_crack, (Ball(np.zeros(3), 0.25), y_cone), (Ball(np.zeros(3), 1.0), y_cone), 0.1, resolution=32
    )
    assert mapping == {1: 1, 2: 2, 3: 3}


def test_orientation_fails_through_a_hole(y_crack, y_cone):
    holed = punch_hole(y_crack, [0.5, 0.0, 0.0], 0.3)
    with pytest.raises(OrientationError):
        orientation_map(
            holed, (Ball(np.zeros(3), 0.25), y_cone), (Ball(np.zeros(3), 1.0), y_cone), 0.1, resolution=32
        )


@pytest.mark.parametrize("kind", ["P", "Y", "T"])
def test_cone_distance_is_one_lipschitz(kind):
    from scipy.spatial.transform import Rotation

    rng = make_rng(7, "lipschitz")
    cone = make_cone(kind, rng.normal(size=3) * 0.2, Rotation.random(random_state=4).as_matrix())
    p = rng.normal(size=(10_000, 3))
    q = p + rng.normal(size=(10_000, 3)) * rng.uniform(0.001, 1.0, size=(10_000, 1))
    gap = np.abs(cone_distance(cone, p) - cone_distance(cone, q))
    assert np.all(gap <= np.linalg.norm(p - q, axis=1) + 1e-12)


@pytest.mark.parametrize("kind, count", [("Y", 3), ("T", 4)])
def test_label_regions_survive_rigid_motion(kind, count):
    from scipy.spatial.transform import Rotation

    shift = np.array([0.2, -0.1, 0.3])
    moved = make_cone(kind, shift, Rotation.random(random_state=3).as_matrix())
    assert label_regions(make_cone(kind), Ball(np.zeros(3), 1.0), 0.05, 96).count == count
    assert label_regions(moved, Ball(shift, 1.0), 0.05, 96).count == count


def test_orientation_chain_stays_injective(y_crack, y_cone):
    mapping = orientation_map(
        y_crack,
        (Ball(np.zeros(3), 0.125), y_cone),
        (Ball(np.zeros(3), 1.0), y_cone),
        0.1,
        resolution=32,
        chain_cone=lambda ball: y_cone,
    )
    assert mapping == {1: 1, 2: 2, 3: 3}
    assert len(set(mapping.values())) == len(mapping)
