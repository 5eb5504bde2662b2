"""Tests for the crack-aware energy solver, normalized energies and the decay experiments."""

import math

import numpy as np
import pytest

from conelab.crack import CrackSet, segments_crack
from conelab.errors import CertificateError, ResolutionError
from conelab.flatness import FlatnessReport
from conelab.harmonic import (
    BONNET_BOUND,
    component_regions,
    decay_experiment,
    decay_ratio,
    differential_inequality_check,
    discretize,
    energy_profile,
    minimize_energy,
    normalized_energy,
    smooth_boundary_data,
    tube_counterexample,
)
from conelab.rng import make_rng


def linear(p):
    return p[:, 0]


@pytest.fixture(scope="module")
def disk_field():
    graph = discretize(CrackSet.empty(2), 128, 2)
    return minimize_energy(graph, linear)


@pytest.fixture
def boxed_graph():
    corners = [[-0.3, -0.3], [0.3, -0.3], [0.3, 0.3], [-0.3, 0.3]]
    box = segments_crack([[corners[i], corners[(i + 1) % 4]] for i in range(4)], 0.02)
    return discretize(box, 64)


def test_discretize_rejects_coarse_grids():
    with pytest.raises(ResolutionError):
        discretize(CrackSet.empty(2), 16, 2)


def test_linear_data_is_reproduced(disk_field):
    pos = disk_field.graph.positions
    np.testing.assert_allclose(disk_field.values, pos[:, 0], atol=1e-5)
    assert disk_field.interior_residual() < 1e-7


def test_linear_field_decays_at_rate_one(disk_field):
    assert decay_ratio(disk_field, 0.8) == pytest.approx(0.5, rel=0.05)
    profile = energy_profile(disk_field)
    assert profile.gamma_hat == pytest.approx(1.0, abs=0.1)


def test_profile_is_monotone_on_a_coarse_sweep(disk_field):
    profile = energy_profile(disk_field, [0.2, 0.4, 0.6, 0.8])
    assert profile.is_monotone()
    assert profile.violations == []
    assert [row["r"] for row in profile.to_rows()] == [0.2, 0.4, 0.6, 0.8]


def test_profile_csv(tmp_path, disk_field):
    path = tmp_path / "profile.csv"
    energy_profile(disk_field, [0.3, 0.6]).to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,E,omega2"
    assert len(lines) == 3


def test_normalized_energy_guards(disk_field):
    with pytest.raises(ResolutionError):
        normalized_energy(disk_field, [0.0, 0.0], 0.02)
    with pytest.raises(ValueError):
        normalized_energy(disk_field, [0.5, 0.0], 0.6)
    with pytest.raises(ValueError):
        energy_profile(disk_field, [0.01, 0.5])


def test_zero_data_gives_vacuous_profile():
    graph = discretize(CrackSet.empty(2), 32, 2)
    u = minimize_energy(graph, lambda p: np.zeros(len(p)))
    assert u.energy() == 0.0
    assert energy_profile(u).vacuous
    assert differential_inequality_check(u).vacuous
    assert math.isnan(decay_ratio(u, 0.8))


def test_differential_inequality_for_linear_data_in_3d():
    graph = discretize(CrackSet.empty(3), 48, 3)
    u = minimize_energy(graph, linear)
    report = differential_inequality_check(u, np.linspace(0.5, 0.9, 9))
    # E grows like r^3, so E / (r E') sits near 1/3
    assert 0.25 < report.max_ratio <= BONNET_BOUND + 0.05
    assert report.passed()


def test_floating_components_are_zero(boxed_graph):
    sep = boxed_graph.separability()
    assert sep["components"] == 2
    assert sep["floating"] == 1
    u = minimize_energy(boxed_graph, linear)
    inner = boxed_graph.locate([[0.0, 0.0]])[0]
    assert u.values[inner] == 0.0


def test_boundary_as_mapping_and_array(boxed_graph):
    n = boxed_graph.n_nodes
    outer = int(boxed_graph.components[boxed_graph.locate([[0.0, 0.8]])[0]])
    nodes = np.nonzero(boxed_graph.boundary)[0][:2]
    u = minimize_energy(boxed_graph, {int(nodes[0]): 1.0, int(nodes[1]): 1.0})
    assert np.allclose(u.values[boxed_graph.components == outer], 1.0)

    data = np.full(n, np.nan)
    data[boxed_graph.boundary] = 2.0
    v = minimize_energy(boxed_graph, data)
    assert np.allclose(v.values[boxed_graph.components == outer], 2.0)
    with pytest.raises(ValueError):
        minimize_energy(boxed_graph, np.zeros(n + 1))


def test_smooth_boundary_data_is_seeded():
    pts = make_rng(0, "pts").normal(size=(10, 3))
    a = smooth_boundary_data(make_rng(5, "data"))(pts)
    b = smooth_boundary_data(make_rng(5, "data"))(pts)
    np.testing.assert_array_equal(a, b)
    assert smooth_boundary_data(make_rng(5, "data"))(np.zeros((1, 3)))[0] == 0.0


def test_component_regions_follow_the_line(line_crack, line_cone):
    graph = discretize(line_crack, 64)
    regions = component_regions(graph, line_cone, 0.05)
    top = int(graph.components[graph.locate([[0.0, 0.5]])[0]])
    bottom = int(graph.components[graph.locate([[0.0, -0.5]])[0]])
    assert regions == {top: 0, bottom: 1}


def test_tube_profile_does_not_decay():
    profile = tube_counterexample(0.1, 1.0, 128)
    assert not profile.vacuous
    assert abs(profile.gamma_hat) < 0.25
    with pytest.raises(ResolutionError):
        tube_counterexample(0.01, 1.0, 64)


def test_decay_needs_a_certificate():
    with pytest.raises(CertificateError):
        decay_experiment(CrackSet.empty(2), [linear], resolution=32)


def test_decay_on_the_empty_disk():
    report = decay_experiment(
        CrackSet.empty(2),
        [linear, lambda p: np.zeros(len(p))],
        certificate=FlatnessReport("certificate", 0.1),
        resolution=64,
    )
    assert report.certified
    assert report.vacuous == 1
    assert report.values[0] == pytest.approx(0.5, rel=0.05)
    assert report.passed


def test_uncertified_decay_is_flagged():
    report = decay_experiment(CrackSet.empty(2), [linear], allow_uncertified=True, resolution=32)
    assert not report.certified
    assert len(report.values) == 1


@pytest.fixture(scope="module")
def y_rays():
    angles = [0.0, 2 * math.pi / 3, 4 * math.pi / 3]
    return segments_crack([[[0.0, 0.0], [1.2 * math.cos(a), 1.2 * math.sin(a)]] for a in angles], 0.02)


@pytest.fixture(scope="module")
def planar_data():
    return smooth_boundary_data(make_rng(3, "boundary"), 3, 2)


def test_maximum_principle_per_component(y_rays, planar_data):
    graph = discretize(y_rays, 64)
    u = minimize_energy(graph, planar_data)
    assert graph.n_components >= 3
    for c in range(graph.n_components):
        nodes = graph.components == c
        fixed = nodes & graph.boundary
        if not fixed.any():
            continue
        lo, hi = u.values[fixed].min(), u.values[fixed].max()
        slack = 1e-6 * max(1.0, hi - lo)
        assert np.all(u.values[nodes] >= lo - slack)
        assert np.all(u.values[nodes] <= hi + slack)


def test_energy_scales_with_the_square_of_the_data(y_rays, planar_data):
    graph = discretize(y_rays, 64)
    u = minimize_energy(graph, planar_data)
    v = minimize_energy(graph, lambda p: 3.0 * planar_data(p))
    assert normalized_energy(v, [0.0, 0.0], 0.5) == pytest.approx(9.0 * normalized_energy(u, [0.0, 0.0], 0.5), rel=1e-6)


def test_normalized_energy_converges_under_refinement(y_rays, planar_data):
    coarse = minimize_energy(discretize(y_rays, 64), planar_data)
    fine = minimize_energy(discretize(y_rays, 128), planar_data)
    a = normalized_energy(coarse, [0.0, 0.0], 0.5)
    b = normalized_energy(fine, [0.0, 0.0], 0.5)
    assert b > 0
    assert abs(a - b) <= 0.1 * b


def test_line_crack_matches_the_reflected_problem(line_crack):
    def even(p):
        return p[:, 0] ** 2 - p[:, 1] ** 2 + 0.5 * p[:, 0]

    cracked = minimize_energy(discretize(line_crack, 64), even)
    free = minimize_energy(discretize(CrackSet.empty(2), 64, 2), even)
    for r in (0.25, 0.5, 0.75):
        assert normalized_energy(cracked, [0.0, 0.0], r) == pytest.approx(
            normalized_energy(free, [0.0, 0.0], r), rel=0.03
        )


@pytest.mark.slow
def test_y_cone_energy_decays_in_3d(y_crack):
    u = minimize_energy(discretize(y_crack, 48), smooth_boundary_data(make_rng(0, "boundary-0"), 3, 3))
    profile = energy_profile(u)
    assert not profile.vacuous
    assert profile.gamma_hat >= 0.8 - 0.05
    assert differential_inequality_check(u, np.linspace(0.4, 0.9, 11)).max_ratio <= BONNET_BOUND + 0.05
