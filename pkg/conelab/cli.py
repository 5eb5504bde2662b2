#!/usr/bin/env python3
"""
conelab CLI

Command-line interface for the cone lab.

Usage:
    conelab run <config>           # Run a scenario file
    conelab decay --type Y         # Energy decay profile of a crack
    conelab eigen --cone Y         # First eigenvalue of a spherical domain
    conelab partition <cover> X Y  # Spot-check a dumped Whitney cover
    conelab plot <profile.csv>     # Log-log plot of an energy profile
"""

import json
import logging
import sys
from typing import Optional

import click
from pydantic import ValidationError

from .config import LabConfig, ScenarioSection, GeometrySection, DecaySection
from .errors import ConfigError, LabError, PlotError
from .geometry_core import make_cone
from .plotting import plot_profile
from .results import ResultStore, format_verdicts
from .runner import run, run_config
from .spherical import first_eigenvalue, mesh_domain, mesh_half_domain
from .whitney import WhitneyCover, evaluate_partition

EXIT_FAIL = 1
EXIT_USAGE = 2

# ============================================================================
# Helpers
# ============================================================================

def fail(message: str, code: int = EXIT_USAGE) -> None:
    """Print a styled error and exit"""
    click.echo(f"{click.style('✗', fg='red')} {message}", err=True)
    sys.exit(code)

def print_store(store: ResultStore) -> None:
    """Print verdicts and exit with the run's code"""
    icon = click.style("✓", fg="green") if store.passed else click.style("✗", fg="red")
    click.echo(format_verdicts(store))
    click.echo(f"{icon} {store.config.scenario.kind}: {'pass' if store.passed else 'FAIL'}")
    sys.exit(store.exit_code)

def parse_radii(text: Optional[str]) -> Optional[list[float]]:
    if not text:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise click.BadParameter(f"radii must be comma-separated numbers: {e}") from e

def guarded(fn, *args, **kwargs):
    """Map lab errors onto exit codes"""
    try:
        return fn(*args, **kwargs)
    except (ConfigError, ValidationError) as e:
        fail(f"Invalid configuration: {e}", EXIT_USAGE)
    except LabError as e:
        fail(f"{type(e).__name__}: {e}", EXIT_FAIL)

# ============================================================================
# CLI Commands
# ============================================================================

@click.group()
@click.option("--verbose", "-v", count=True, help="-v for info, -vv for debug logging")
@click.pass_context
def cli(ctx, verbose: int):
    """Minimal-cone crack lab: flatness, Whitney extension, energy decay, spherical eigenvalues"""
    ctx.ensure_object(dict)
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj["verbose"] = verbose

@cli.command("run")
@click.argument("config_path", required=False)
@click.option("--out", "-o", default=None, help="Output directory")
@click.option("--seed", "-s", type=int, default=None, help="Override scenario seed")
@click.option("--jobs", "-j", type=int, default=None, help="Parallel trials")
def run_cmd(config_path: Optional[str], out: Optional[str], seed: Optional[int], jobs: Optional[int]):
    """Run a scenario file (defaults: ~/.conelab/config.yaml, ./conelab.yaml)"""
    store = guarded(run, config_path, seed=seed, jobs=jobs, out=out)
    print_store(store)

@cli.command()
@click.option("--type", "crack_type", type=click.Choice(["P", "Y", "T", "tube", "empty", "file"]), default="Y")
@click.option("--crack", "crack_file", type=click.Path(), default=None, help="Triangle soup (with --type file)")
@click.option("--resolution", "-n", type=int, default=64)
@click.option("--gamma", "-g", type=float, default=0.75)
@click.option("--radii", default=None, help="Comma-separated sweep radii")
@click.option("--seed", "-s", type=int, default=0)
@click.option("--trials", "-t", type=int, default=10)
@click.option("--dimension", "-d", type=click.Choice(["2", "3"]), default="3")
@click.option("--out", "-o", default="results")
@click.option("--jobs", "-j", type=int, default=1)
def decay(crack_type, crack_file, resolution, gamma, radii, seed, trials, dimension, out, jobs):
    """Energy decay profile (CSV r,E,omega2 and SVG) with the decay verdict"""
    if crack_type == "file" and not crack_file:
        raise click.UsageError("--type file needs --crack FILE")
    dim = 2 if crack_type == "tube" else int(dimension)
    kind = "counterexample" if crack_type == "tube" else "decay"

    def build() -> LabConfig:
        return LabConfig(
            scenario=ScenarioSection(kind=kind, seed=seed, trials=trials, jobs=jobs, out=out),
            geometry=GeometrySection(crack=crack_type, crack_file=crack_file, resolution=resolution, dimension=dim),
            decay=DecaySection(gamma=gamma, radii=parse_radii(radii)),
        )

    cfg = guarded(build)
    store = guarded(run_config, cfg)
    print_store(store)

@cli.command()
@click.option("--cone", "-c", type=click.Choice(["P", "Y", "T"]), default="Y")
@click.option("--h", "target_h", type=float, default=0.05, help="Target mesh size")
@click.option("--bc", type=click.Choice(["neumann", "mixed"]), default="neumann")
@click.option("--component", type=int, default=0)
@click.option("--axis", type=int, default=0, help="Symmetry axis for mixed conditions")
@click.option("--off", "off_path", type=click.Path(), default=None, help="Export the mesh as OFF")
def eigen(cone, target_h, bc, component, axis, off_path):
    """First eigenvalue; prints JSON {lambda1, h, extrapolated}"""
    if target_h <= 0:
        raise click.BadParameter("--h must be positive")

    def solve():
        c = make_cone(cone)
        if bc == "mixed":
            mesh = mesh_half_domain(c, component, axis, 1.0, target_h)
        else:
            mesh = mesh_domain(c, 1.0, component, target_h)
        if off_path:
            mesh.export_off(off_path)
        return first_eigenvalue(mesh)

    try:
        result = guarded(solve)
    except ValueError as e:
        fail(str(e), EXIT_USAGE)
    click.echo(json.dumps(result.to_json()))

@cli.command()
@click.argument("cover_csv", type=click.Path(exists=True))
@click.argument("point", nargs=-1, type=float, required=True)
@click.option("--U", "U", type=float, default=30.0)
def partition(cover_csv, point, U):
    """Evaluate phi0 and theta_j of a dumped cover at POINT"""
    if len(point) not in (2, 3):
        raise click.UsageError("POINT takes two or three coordinates")
    try:
        cover = WhitneyCover.from_csv(cover_csv, dimension=len(point), U=U)
    except ValueError as e:
        fail(str(e), EXIT_USAGE)
    phi0, theta = evaluate_partition(cover, list(point))
    weights = {str(j): w for j, w in sorted(theta.items())}
    click.echo(json.dumps({"phi0": phi0, "theta": weights, "theta_sum": sum(theta.values())}))

@cli.command()
@click.argument("csv_path", type=click.Path())
@click.option("--out", "-o", default=None, help="SVG path (default: next to the CSV)")
def plot(csv_path, out):
    """Log-log plot of a profile CSV (r, E, omega2)"""
    try:
        path = plot_profile(csv_path, out)
    except PlotError as e:
        fail(str(e), EXIT_USAGE)
    click.echo(f"{click.style('✓', fg='green')} {path}")

def main():
    """Main entry point"""
    cli(obj={})

if __name__ == "__main__":
    main()
