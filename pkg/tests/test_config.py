"""Tests for scenario loading and validation."""

from pathlib import Path

import pytest

from conelab.config import LabConfig, dump_config, load_config, load_config_text
from conelab.errors import ConfigError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = """
scenario:
  kind: eigen
  seed: 3
geometry:
  cone: Y
"""


def test_minimal_scenario_gets_defaults():
    cfg = load_config_text(MINIMAL)
    assert cfg.scenario.kind == "eigen"
    assert cfg.scenario.seed == 3
    assert cfg.scenario.trials == 10
    assert cfg.spectral.bc == "neumann"
    assert cfg.whitney.U == 30.0


def test_dump_is_canonical():
    cfg = load_config_text(MINIMAL)
    text = dump_config(cfg)
    assert load_config_text(text) == cfg
    assert dump_config(load_config_text(text)) == text


@pytest.mark.parametrize(
    "text",
    [
        "scenario: [unclosed",
        "- just\n- a list\n",
        "scenario:\n  kind: sing\n",
        "scenario:\n  kind: eigen\n  color: blue\n",
        "scenario:\n  kind: eigen\ngeometry:\n  resolution: 8\n",
        "scenario:\n  kind: decay\ngeometry:\n  crack: file\n",
        "scenario:\n  kind: decay\ndecay:\n  radii: [0.5, 1.5]\n",
        "scenario:\n  kind: whitney\nwhitney:\n  U: 20.0\n",
        "scenario:\n  kind: whitney\nflatness:\n  overlap_constant: 2.0\n",
    ],
)
def test_invalid_scenarios_raise_config_error(text):
    with pytest.raises(ConfigError):
        load_config_text(text)


def test_overrides_are_validated():
    cfg = load_config_text(MINIMAL)
    assert cfg.with_overrides(seed=None, jobs=None) is cfg
    updated = cfg.with_overrides(seed=11, jobs=4)
    assert updated.scenario.seed == 11
    assert updated.scenario.jobs == 4
    assert cfg.scenario.seed == 3
    with pytest.raises(ValueError):
        cfg.with_overrides(jobs=0)


def test_load_config_from_path(tmp_path):
    path = tmp_path / "scenario.yaml"
    path.write_text(MINIMAL)
    assert load_config(path).geometry.cone == "Y"
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_scenarios_load(path):
    assert isinstance(load_config(path), LabConfig)
