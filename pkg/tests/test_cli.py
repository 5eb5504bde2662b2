"""Tests for the conelab command line."""

import json

import numpy as np
from click.testing import CliRunner

from conelab.cli import cli
from conelab.geometry_core import Ball
from conelab.whitney import WhitneyCover


def invoke(*args):
    return CliRunner().invoke(cli, list(args), obj={})


def test_eigen_prints_json():
    result = invoke("eigen", "--cone", "P", "--h", "0.2")
    assert result.exit_code == 0, result.output
    data = json.loads(result.output)
    assert set(data) == {"lambda1", "h", "extrapolated"}
    assert abs(data["extrapolated"] - 2.0) < 0.05


def test_eigen_exports_off(tmp_path):
    off = tmp_path / "lune.off"
    result = invoke("eigen", "--cone", "Y", "--h", "0.3", "--off", str(off))
    assert result.exit_code == 0, result.output
    assert off.read_text().startswith("OFF")


def test_eigen_usage_errors():
    assert invoke("eigen", "--h", "0").exit_code == 2
    assert invoke("eigen", "--cone", "Y", "--component", "5").exit_code == 2
    assert invoke("eigen", "--cone", "Q").exit_code == 2


def test_run_with_malformed_config(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("scenario: [unclosed")
    result = invoke("run", str(path))
    assert result.exit_code == 2
    assert "Invalid configuration" in result.output


def test_run_eigen_scenario(tmp_path):
    path = tmp_path / "eigen.yaml"
    path.write_text("scenario:\n  kind: eigen\ngeometry:\n  cone: P\nspectral:\n  target_h: 0.15\n  fields: 3\n")
    result = invoke("run", str(path), "--out", str(tmp_path / "out"), "--seed", "4")
    assert result.exit_code == 0, result.output
    assert "[OK] lambda1" in result.output
    assert "[OK] poincare" in result.output


def test_decay_file_needs_a_path():
    assert invoke("decay", "--type", "file").exit_code == 2


def test_decay_rejects_bad_radii(tmp_path):
    result = invoke("decay", "--type", "empty", "--radii", "0.2,abc", "--out", str(tmp_path))
    assert result.exit_code == 2


def test_plot_on_empty_csv(tmp_path):
    path = tmp_path / "profile.csv"
    path.write_text("")
    result = invoke("plot", str(path))
    assert result.exit_code == 2


def test_plot_writes_svg(tmp_path):
    path = tmp_path / "profile.csv"
    path.write_text("r,E,omega2\n0.25,0.1,0.4\n0.5,0.3,0.6\n")
    out = tmp_path / "p.svg"
    result = invoke("plot", str(path), "--out", str(out))
    assert result.exit_code == 0, result.output
    assert out.exists()


def test_partition_on_a_dumped_cover(tmp_path):
    cover = WhitneyCover(
        np.array([[0.0, 0.0], [0.05, 0.0]]), np.array([0.02, 0.02]), np.array([0.02, 0.02]), 30.0, Ball(np.zeros(2), 0.9)
    )
    path = tmp_path / "cover.csv"
    cover.to_csv(path)

    far = json.loads(invoke("partition", str(path), "0.5", "0.5").output)
    assert far == {"phi0": 1.0, "theta": {}, "theta_sum": 0}

    result = invoke("partition", str(path), "0.0", "0.0")
    assert result.exit_code == 0, result.output
    near = json.loads(result.output)
    assert near["phi0"] == 0.0
    assert abs(near["theta_sum"] - 1.0) < 1e-12
    assert "0" in near["theta"]


def test_partition_needs_two_or_three_coordinates(tmp_path):
    path = tmp_path / "cover.csv"
    path.write_text("x,y,z,r,cone_type\n")
    assert invoke("partition", str(path), "0.1").exit_code == 2
