"""
conelab: Minimal-Cone Crack Lab

Numerical experiments around cracks that look like minimal cones: flatness
certification, Whitney extension, harmonic energy decay and spherical
eigenvalues.
"""

__version__ = "0.1.0"

from .config import LabConfig, load_config, load_config_text, dump_config
from .crack import CrackSet, cone_crack, load_triangle_soup, save_triangle_soup
from .errors import LabError
from .flatness import BadBallFamily, FlatnessReport, beta, check_eps0_eps_minimal
from .geometry_core import Ball, ConeType, MinimalCone, make_cone
from .harmonic import decay_experiment, discretize, energy_profile, minimize_energy, normalized_energy
from .results import ResultStore, Verdict
from .runner import run
from .spherical import first_eigenvalue, mesh_domain
from .whitney import build_delta, select_whitney_balls

__all__ = [
    "LabConfig",
    "load_config",
    "load_config_text",
    "dump_config",
    "CrackSet",
    "cone_crack",
    "load_triangle_soup",
    "save_triangle_soup",
    "LabError",
    "BadBallFamily",
    "FlatnessReport",
    "beta",
    "check_eps0_eps_minimal",
    "Ball",
    "ConeType",
    "MinimalCone",
    "make_cone",
    "decay_experiment",
    "discretize",
    "energy_profile",
    "minimize_energy",
    "normalized_energy",
    "ResultStore",
    "Verdict",
    "run",
    "first_eigenvalue",
    "mesh_domain",
    "build_delta",
    "select_whitney_balls",
]
