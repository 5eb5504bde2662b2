"""Shared fixtures for the conelab test suite."""

import os

import numpy as np
import pytest

from conelab.crack import cone_crack, segments_crack
from conelab.geometry_core import Ball, frame_with_normal, make_cone

RUN_SLOW = os.environ.get("CONELAB_RUN_SLOW") == "1"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale run, enabled with CONELAB_RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW:
        return
    skip = pytest.mark.skip(reason="set CONELAB_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def unit_ball():
    return Ball(np.zeros(3), 1.0)


@pytest.fixture
def plane_cone():
    return make_cone("P")


@pytest.fixture
def y_cone():
    return make_cone("Y")


@pytest.fixture
def t_cone():
    return make_cone("T")


@pytest.fixture
def line_cone():
    """The x-axis as a P cone seen in the plane z = 0"""
    return make_cone("P", rotation=frame_with_normal([0.0, 1.0, 0.0]))


@pytest.fixture
def line_crack():
    return segments_crack([[[-1.2, 0.0], [1.2, 0.0]]], 0.02)


@pytest.fixture
def y_crack(y_cone):
    return cone_crack(y_cone, Ball(np.zeros(3), 1.2), 0.1)


@pytest.fixture
def plane_crack(plane_cone):
    return cone_crack(plane_cone, Ball(np.zeros(3), 1.2), 0.1)
