"""
Result Store

Verdicts, the per-run output directory (config snapshot, CSV tables, JSON
summaries, SVG plots) and text formatting for the terminal.
"""

import csv
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence

from .config import LabConfig, dump_config

logger = logging.getLogger(__name__)


@dataclass
class Verdict:
    """Pass/fail outcome of one acceptance check."""
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""
    source: Optional[str] = None

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("value", "threshold"):
            if isinstance(out[key], float) and not math.isfinite(out[key]):
                out[key] = str(out[key])
        return out


def run_id_for(cfg: LabConfig) -> str:
    """Stable id from the canonical config text"""
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()[:12]


def _cell(value: Any) -> Any:
    if isinstance(value, float):
        return format(value, ".17g")
    return value


@dataclass
class ResultStore:
    """Output directory of one run; CSV and JSON files are written as they arrive"""
    root: Path
    config: LabConfig
    run_id: str = ""
    verdicts: List[Verdict] = field(default_factory=list)
    tables: List[str] = field(default_factory=list)
    summaries: List[str] = field(default_factory=list)
    plots: List[str] = field(default_factory=list)

    @classmethod
    def create(cls, cfg: LabConfig, out: Optional[str] = None) -> "ResultStore":
        run_id = run_id_for(cfg)
        root = Path(out or cfg.scenario.out).expanduser() / run_id
        root.mkdir(parents=True, exist_ok=True)
        (root / "config.yaml").write_text(dump_config(cfg))
        logger.info("Result store %s", root)
        return cls(root=root, config=cfg, run_id=run_id)

    @property
    def passed(self) -> bool:
        return bool(self.verdicts) and all(v.passed for v in self.verdicts)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def path(self, name: str) -> Path:
        return self.root / name

    def write_csv(self, name: str, rows: Iterable[dict], fieldnames: Sequence[str]) -> Path:
        path = self.path(name)
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(fieldnames))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _cell(v) for k, v in row.items()})
        self.tables.append(name)
        return path

    def write_json(self, name: str, data: Any) -> Path:
        path = self.path(name)
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        self.summaries.append(name)
        return path

    def add_plot(self, name: str) -> Path:
        self.plots.append(name)
        return self.path(name)

    def add_verdict(self, verdict: Verdict) -> Verdict:
        self.verdicts.append(verdict)
        logger.info("verdict %s: %s (%.6g vs %.6g)", verdict.name, "pass" if verdict.passed else "FAIL", verdict.value, verdict.threshold)
        return verdict

    def finalize(self) -> None:
        """Write verdicts.csv, summary.json and the manifest"""
        self.write_csv(
            "verdicts.csv",
            [asdict(v) for v in self.verdicts],
            ["name", "passed", "value", "threshold", "detail", "source"],
        )
        self.write_json("summary.json", {
            "run_id": self.run_id,
            "kind": self.config.scenario.kind,
            "passed": self.passed,
            "verdicts": [v.to_dict() for v in self.verdicts],
        })
        # the only file that differs between identical reruns
        manifest = {
            "run_id": self.run_id,
            "finished": datetime.now(timezone.utc).isoformat(),
            "tables": sorted(set(self.tables)),
            "summaries": sorted(set(self.summaries)),
            "plots": sorted(set(self.plots)),
        }
        self.path("manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def format_verdicts(store: ResultStore) -> str:
    """Format verdicts for display."""
    lines = []
    lines.append("=" * 60)
    lines.append(f"Run {store.run_id} ({store.config.scenario.kind})")
    lines.append("-" * 60)

    for v in store.verdicts:
        status = "[OK]" if v.passed else "[FAIL]"
        line = f"{status} {v.name}: {v.value:.6g} (threshold {v.threshold:.6g})"
        if v.detail:
            line += f" - {v.detail}"
        lines.append(line)

    lines.append("-" * 60)
    if store.passed:
        lines.append("All verdicts passed.")
    elif not store.verdicts:
        lines.append("No verdicts recorded.")
    else:
        lines.append("Some verdicts failed. Check the rows above.")
    lines.append(f"Results: {store.root}")
    lines.append("=" * 60)

    return "\n".join(lines)
