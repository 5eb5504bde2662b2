"""
Profile Plots

Log-log SVG plots of omega2(0, r) profiles with reference slopes.
"""

import csv
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import PlotError  # noqa: E402

logger = logging.getLogger(__name__)

REFERENCE_SLOPES = (0.8, 1.0)
PROFILE_FIELDS = ("r", "E", "omega2")


def read_profile(path: Union[str, Path]) -> tuple[np.ndarray, np.ndarray]:
    """Radii and omega2 from a profile CSV (r, E, omega2)"""
    path = Path(path)
    if not path.exists():
        raise PlotError(f"Profile CSV not found: {path}")
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or any(k not in reader.fieldnames for k in PROFILE_FIELDS):
            raise PlotError(f"{path} is empty or lacks the columns {', '.join(PROFILE_FIELDS)}")
        rows = [(float(row["r"]), float(row["omega2"])) for row in reader]
    if not rows:
        raise PlotError(f"{path} has no rows")
    data = np.array(rows)
    return data[:, 0], data[:, 1]


def plot_profile(
    csv_path: Union[str, Path],
    svg_path: Optional[Union[str, Path]] = None,
    slopes: Sequence[float] = REFERENCE_SLOPES,
    title: Optional[str] = None,
) -> Path:
    """Plot omega2 against r on log-log axes with reference power laws anchored at the outermost radius"""
    r, omega = read_profile(csv_path)
    keep = (r > 0) & (omega > 0)
    if not np.any(keep):
        raise PlotError(f"{csv_path} has no positive (r, omega2) pairs")
    r, omega = r[keep], omega[keep]
    out = Path(svg_path) if svg_path else Path(csv_path).with_suffix(".svg")

    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(r, omega, "o-", markersize=3, linewidth=1.5, label="omega2(0, r)")
    r_ref = np.array([r.min(), r.max()])
    for gamma in slopes:
        ax.loglog(r_ref, omega[-1] * (r_ref / r[-1]) ** gamma, "--", linewidth=1, label=f"slope {gamma:g}")
    ax.set_xlabel("r")
    ax.set_ylabel("omega2(0, r)")
    ax.set_title(title or Path(csv_path).stem)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("Wrote %s", out)
    return out
