"""Tests for trial fan-out, crack construction and small end-to-end scenarios."""

import csv
import json
import threading
import time

import pytest

from conelab.config import load_config_text
from conelab.crack import save_triangle_soup
from conelab.errors import ConfigError
from conelab.runner import build_crack, fan_out, run, run_config, run_trials


def scenario(text: str):
    return load_config_text(text)


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


# ============================================================================
# Fan-Out
# ============================================================================

@pytest.mark.asyncio
async def test_fan_out_keeps_submission_order():
    def slow_square(i: int) -> int:
        time.sleep(0.01 * (5 - i))
        return i * i

    assert await fan_out(slow_square, 5, jobs=3) == [0, 1, 4, 9, 16]
    assert await fan_out(slow_square, 5, jobs=1) == [0, 1, 4, 9, 16]


@pytest.mark.asyncio
async def test_fan_out_uses_worker_threads():
    names = await fan_out(lambda i: threading.current_thread().name, 4, jobs=2)
    assert all(name != threading.main_thread().name for name in names)


def test_run_trials_serial():
    assert run_trials(lambda i: -i, 3) == [0, -1, -2]


# ============================================================================
# Crack Construction
# ============================================================================

def test_build_crack_variants():
    empty = build_crack(scenario("scenario:\n  kind: decay\ngeometry:\n  crack: empty\n  dimension: 2\n"))
    assert empty.crack.dimension == 2
    assert empty.cone0 is None

    y = build_crack(scenario("scenario:\n  kind: decay\ngeometry:\n  crack: Y\n"))
    assert y.cone0.cone_type.name == "Y"
    assert len(y.bad) == 0

    line = build_crack(scenario("scenario:\n  kind: decay\ngeometry:\n  crack: P\n  dimension: 2\n"))
    assert line.crack.dimension == 2


def test_wrinkled_crack_records_its_bad_balls():
    cfg = scenario("scenario:\n  kind: flatness\n  seed: 4\ngeometry:\n  crack: P\n  wrinkles: 2\nflatness:\n  eps: 0.1\n")
    inst = build_crack(cfg)
    assert 1 <= len(inst.bad) <= 2
    assert all(r <= cfg.flatness.eps for r in inst.bad.radii)
    again = build_crack(cfg)
    assert (again.bad.centers == inst.bad.centers).all()


@pytest.mark.parametrize(
    "geometry",
    [
        "crack: tube\n  dimension: 3",
        "crack: T\n  dimension: 2",
        "crack: P\n  dimension: 2\n  wrinkles: 1",
        "crack: file\n  crack_file: /nonexistent/crack.tri",
    ],
)
def test_build_crack_rejects_bad_geometry(geometry):
    cfg = scenario(f"scenario:\n  kind: decay\ngeometry:\n  {geometry}\n")
    with pytest.raises(ConfigError):
        build_crack(cfg)


def test_crack_from_file(tmp_path, y_crack):
    path = tmp_path / "y.tri"
    save_triangle_soup(y_crack, path)
    cfg = scenario(f"scenario:\n  kind: decay\ngeometry:\n  crack: file\n  crack_file: {path}\n")
    inst = build_crack(cfg)
    assert len(inst.crack.triangles) == len(y_crack.triangles)
    assert inst.cone0 is None


# ============================================================================
# Scenarios
# ============================================================================

def test_eigen_scenario(tmp_path):
    cfg = scenario(
        "scenario:\n  kind: eigen\n  seed: 2\n"
        "geometry:\n  cone: P\n"
        "spectral:\n  target_h: 0.15\n  fields: 5\n"
    )
    store = run_config(cfg, str(tmp_path))
    assert store.passed, [v for v in store.verdicts if not v.passed]
    data = json.loads((store.root / "eigen.json").read_text())
    assert data["extrapolated"] == pytest.approx(2.0, rel=0.02)
    assert (store.root / "domain.off").read_text().startswith("OFF")
    assert len(read_rows(store.root / "poincare.csv")) == 5
    assert {"summary.json", "verdicts.csv", "manifest.json"} <= {p.name for p in store.root.iterdir()}


def test_counterexample_scenario(tmp_path):
    cfg = scenario(
        "scenario:\n  kind: counterexample\n"
        "geometry:\n  crack: tube\n  dimension: 2\n  resolution: 128\n"
        "decay:\n  tube_eps: 0.1\n"
    )
    store = run_config(cfg, str(tmp_path))
    names = {v.name: v for v in store.verdicts}
    assert names["tube_violates_decay"].passed
    assert read_rows(store.root / "tube_profile.csv")
    assert (store.root / "tube_profile.svg").exists()


def test_decay_on_the_empty_disk(tmp_path):
    cfg = scenario(
        "scenario:\n  kind: decay\n  seed: 5\n  trials: 3\n"
        "geometry:\n  crack: empty\n  dimension: 2\n  resolution: 64\n"
    )
    store = run_config(cfg, str(tmp_path))
    assert [v.name for v in store.verdicts] == ["decay"]
    assert len(read_rows(store.root / "ratios.csv")) == 3
    assert read_rows(store.root / "profile.csv")[0].keys() == {"r", "E", "omega2"}


def test_whitney_scenario(tmp_path):
    cfg = scenario(
        "scenario:\n  kind: whitney\n  seed: 13\n  trials: 2\n  jobs: 2\n"
        "geometry:\n  crack: P\n  dimension: 2\n"
        "flatness:\n  eps: 0.02\n"
        "whitney:\n  n_probe: 200\n  energy: false\n"
    )
    store = run_config(cfg, str(tmp_path))
    rows = read_rows(store.root / "whitney.csv")
    assert [row["trial"] for row in rows] == ["0", "1"]
    assert (store.root / "cover.csv").exists()
    assert [v.name for v in store.verdicts] == ["cover_clauses"]


def test_scenario_errors_name_the_kind(tmp_path):
    cfg = scenario("scenario:\n  kind: flatness\ngeometry:\n  crack: P\n  dimension: 2\n")
    with pytest.raises(ConfigError, match="flatness scenario"):
        run_config(cfg, str(tmp_path))


def test_run_applies_overrides(tmp_path):
    path = tmp_path / "eigen.yaml"
    path.write_text("scenario:\n  kind: eigen\ngeometry:\n  cone: P\nspectral:\n  target_h: 0.3\n  fields: 0\n")
    store = run(path, seed=9, out=str(tmp_path / "out"))
    assert store.config.scenario.seed == 9
    assert store.root.parent == tmp_path / "out"


def test_reruns_write_identical_tables(tmp_path):
    text = (
        "scenario:\n  kind: decay\n  seed: 5\n  trials: 3\n  jobs: 2\n"
        "geometry:\n  crack: empty\n  dimension: 2\n  resolution: 64\n"
    )
    first = run_config(scenario(text), str(tmp_path / "a"))
    second = run_config(scenario(text), str(tmp_path / "b"))
    assert first.run_id == second.run_id
    tables = sorted(p.name for p in first.root.glob("*.csv"))
    assert {"profile.csv", "ratios.csv", "verdicts.csv"} <= set(tables)
    for name in tables:
        assert (first.root / name).read_bytes() == (second.root / name).read_bytes()
