"""Tests for verdicts, the result store and profile plots."""

import csv
import json
import math

import pytest

from conelab.config import load_config_text
from conelab.errors import PlotError
from conelab.plotting import plot_profile, read_profile
from conelab.results import ResultStore, Verdict, format_verdicts, run_id_for

SCENARIO = "scenario:\n  kind: eigen\n  seed: 1\n"


@pytest.fixture
def store(tmp_path):
    return ResultStore.create(load_config_text(SCENARIO), str(tmp_path))


# ============================================================================
# Result Store
# ============================================================================

def test_run_id_depends_on_the_config():
    a = load_config_text(SCENARIO)
    b = load_config_text("scenario:\n  seed: 1\n  kind: eigen\n")
    c = load_config_text("scenario:\n  kind: eigen\n  seed: 2\n")
    assert run_id_for(a) == run_id_for(b)
    assert run_id_for(a) != run_id_for(c)
    assert len(run_id_for(a)) == 12


def test_store_snapshots_the_config(store):
    assert store.root.name == store.run_id
    assert (store.root / "config.yaml").exists()


def test_empty_store_fails(store):
    assert not store.passed
    assert store.exit_code == 1
    assert "No verdicts recorded." in format_verdicts(store)


def test_verdicts_and_summary(store):
    store.add_verdict(Verdict("lambda1", True, 2.001, 2.0, source="spherical"))
    assert store.passed
    assert store.exit_code == 0
    store.add_verdict(Verdict("poincare", False, math.inf, 0.515))
    assert store.exit_code == 1
    text = format_verdicts(store)
    assert "[OK] lambda1" in text
    assert "[FAIL] poincare" in text

    store.finalize()
    summary = json.loads((store.root / "summary.json").read_text())
    assert summary["passed"] is False
    assert summary["verdicts"][1]["value"] == "inf"
    with open(store.root / "verdicts.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert [row["name"] for row in rows] == ["lambda1", "poincare"]
    manifest = json.loads((store.root / "manifest.json").read_text())
    assert manifest["tables"] == ["verdicts.csv"]
    assert manifest["summaries"] == ["summary.json"]


def test_csv_floats_keep_full_precision(store):
    path = store.write_csv("values.csv", [{"x": 0.1 + 0.2}], ["x"])
    assert path.read_text().splitlines()[1] == format(0.1 + 0.2, ".17g")


# ============================================================================
# Plots
# ============================================================================

def test_plot_writes_svg(tmp_path):
    csv_path = tmp_path / "profile.csv"
    csv_path.write_text("r,E,omega2\n0.25,0.1,0.4\n0.5,0.3,0.6\n1.0,0.8,0.8\n")
    r, omega = read_profile(csv_path)
    assert list(r) == [0.25, 0.5, 1.0]
    out = plot_profile(csv_path)
    assert out == csv_path.with_suffix(".svg")
    assert "<svg" in out.read_text()


@pytest.mark.parametrize(
    "content",
    ["", "r,E,omega2\n", "a,b\n1,2\n", "r,E,omega2\n0.5,0,0\n"],
)
def test_plot_rejects_unusable_profiles(tmp_path, content):
    csv_path = tmp_path / "profile.csv"
    csv_path.write_text(content)
    with pytest.raises(PlotError):
        plot_profile(csv_path)


def test_plot_needs_the_file(tmp_path):
    with pytest.raises(PlotError):
        read_profile(tmp_path / "missing.csv")
