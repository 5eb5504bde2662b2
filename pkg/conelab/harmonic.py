"""
Harmonic Energy

Discrete Dirichlet energy minimization on the crack-aware grid graph of the
unit ball (cut edges carry no flux, the discrete Neumann condition on the
crack), the normalized energy omega2(x, r), radius sweeps with power-law
fits, and the decay experiments including the tube counterexample.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.sparse import coo_matrix, csr_matrix, diags
from scipy.sparse.linalg import LinearOperator, cg
from scipy.stats import linregress

from .crack import CrackSet, GridGraph, build_grid_graph, tube_crack
from .errors import CertificateError, ResolutionError, SolverError
from .flatness import BadBallFamily, FlatnessReport
from .geometry_core import Ball, MinimalCone, cone_region
from .whitney import build_cut_set

logger = logging.getLogger(__name__)

MIN_RESOLUTION = 32
SOLVER_RTOL = 1e-10
FIT_RANGE = (0.1, 0.7)
SWEEP_POINTS = 64
BONNET_BOUND = 1.0 / (2.0 * math.sqrt(2.0))

BoundaryData = Union[Callable[[NDArray[np.float64]], ArrayLike], Mapping[int, float], NDArray[np.float64]]


# ============================================================================
# Graph and Fields
# ============================================================================

@dataclass(eq=False)
class CrackGraph(GridGraph):
    """Grid graph of B(0, 1) minus the crack"""
    crack: Optional[CrackSet] = None

    @cached_property
    def laplacian(self) -> csr_matrix:
        n = self.n_nodes
        e = self.edges
        w = np.ones(len(e))
        adj = coo_matrix((np.concatenate([w, w]), (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))), shape=(n, n))
        degree = np.asarray(adj.sum(axis=1)).ravel()
        return csr_matrix(diags(degree) - adj)

    def separability(self) -> dict:
        sizes = np.bincount(self.components, minlength=self.n_components)
        floating = np.unique(self.components[self.floating])
        return {
            "components": int(self.n_components),
            "floating": int(len(floating)),
            "sizes": sizes.tolist(),
        }


@dataclass(eq=False)
class ScalarField:
    graph: CrackGraph
    values: NDArray[np.float64]
    iterations: int = 0

    @property
    def crack(self) -> CrackSet:
        return self.graph.crack if self.graph.crack is not None else CrackSet.empty(self.graph.dimension)

    @cached_property
    def edge_energy(self) -> NDArray[np.float64]:
        """(difference / step)^2 * cell measure per edge"""
        e = self.graph.edges
        diff = self.values[e[:, 1]] - self.values[e[:, 0]]
        return (diff / self.graph.step) ** 2 * self.graph.cell_measure

    @cached_property
    def edge_midpoints(self) -> NDArray[np.float64]:
        e = self.graph.edges
        return 0.5 * (self.graph.positions[e[:, 0]] + self.graph.positions[e[:, 1]])

    def energy(self) -> float:
        return float(self.edge_energy.sum())

    def interior_residual(self) -> float:
        """Largest |L u| over nodes without Dirichlet data"""
        free = ~self.graph.boundary & ~self.graph.floating
        if not np.any(free):
            return 0.0
        return float(np.max(np.abs((self.graph.laplacian @ self.values)[free])))


def discretize(crack: CrackSet, resolution: int, dimension: Optional[int] = None) -> CrackGraph:
    if resolution < MIN_RESOLUTION:
        raise ResolutionError(f"Resolution {resolution} is below {MIN_RESOLUTION}")
    dim = dimension or crack.dimension
    if not crack.is_empty and crack.dimension != dim:
        raise ValueError(f"Crack dimension {crack.dimension} does not match {dim}")
    graph = build_grid_graph(crack, Ball(np.zeros(dim), 1.0), resolution, graph_cls=CrackGraph)
    graph.crack = crack
    if not crack.is_empty:
        report = graph.separability()
        if report["components"] - report["floating"] < 2:
            logger.warning(
                "Crack does not separate the grid at resolution %d: %s", resolution, report
            )
    return graph


def _boundary_values(graph: CrackGraph, boundary: BoundaryData) -> tuple[NDArray[np.bool_], NDArray[np.float64]]:
    fixed = graph.boundary.copy()
    values = np.zeros(graph.n_nodes)
    if callable(boundary):
        values[fixed] = np.asarray(boundary(graph.positions[fixed]), dtype=float)
    elif isinstance(boundary, Mapping):
        fixed[:] = False
        for node, v in boundary.items():
            fixed[int(node)] = True
            values[int(node)] = float(v)
    else:
        arr = np.asarray(boundary, dtype=float)
        if arr.shape != (graph.n_nodes,):
            raise ValueError(f"Boundary array must have {graph.n_nodes} entries, got {arr.shape}")
        fixed = ~np.isnan(arr)
        values[fixed] = arr[fixed]
    return fixed, values


def minimize_energy(
    graph: CrackGraph,
    boundary: BoundaryData,
    rtol: float = SOLVER_RTOL,
    maxiter: Optional[int] = None,
) -> ScalarField:
    """Discrete harmonic extension of the boundary data, per component.

    Components without Dirichlet data are floating and set to 0.
    """
    fixed, values = _boundary_values(graph, boundary)
    has_data = np.zeros(graph.n_components, dtype=bool)
    has_data[graph.components[fixed]] = True
    floating = ~has_data[graph.components]
    free = ~fixed & ~floating
    values[floating] = 0.0

    n_free = int(free.sum())
    iterations = 0
    if n_free:
        L = graph.laplacian
        A = L[free][:, free]
        rhs = -(L[free][:, fixed] @ values[fixed])
        inv_diag = 1.0 / A.diagonal()
        precond = LinearOperator(A.shape, matvec=lambda x: inv_diag * x, dtype=float)

        count = [0]

        def tick(_):
            count[0] += 1

        cap = maxiter or 10 * n_free
        sol, info = cg(A, rhs, rtol=rtol, atol=0.0, maxiter=cap, M=precond, callback=tick)
        iterations = count[0]
        if info != 0:
            raise SolverError(f"CG did not converge in {cap} iterations (info={info}, {n_free} unknowns)")
        values[free] = sol
    logger.debug("minimize_energy: %d unknowns, %d CG iterations", n_free, iterations)
    return ScalarField(graph, values, iterations)


# ============================================================================
# Normalized Energy
# ============================================================================

def _check_ball(u: ScalarField, x: NDArray[np.float64], r: float) -> None:
    g = u.graph
    if r < 4.0 * g.step:
        raise ResolutionError(f"Radius {r:.4g} is below four cells ({4 * g.step:.4g})")
    if float(np.linalg.norm(x - g.ball.center)) + r > g.ball.radius * (1 + 1e-9):
        raise ValueError(f"B({x.tolist()}, {r}) leaves the domain")


def normalized_energy(u: ScalarField, x: ArrayLike, r: float) -> float:
    """omega2(x, r): energy of edges with midpoint in B(x, r), over r^(N-1)"""
    c = np.asarray(x, dtype=float).reshape(-1)[: u.graph.dimension]
    _check_ball(u, c, r)
    inside = np.linalg.norm(u.edge_midpoints - c, axis=1) < r
    return float(u.edge_energy[inside].sum()) / r ** (u.graph.dimension - 1)


def decay_ratio(u: ScalarField, r: float, a: float = 0.5) -> float:
    """omega2(0, a r) / omega2(0, r); NaN when the outer energy vanishes"""
    origin = np.zeros(u.graph.dimension)
    outer = normalized_energy(u, origin, r)
    if outer == 0:
        return math.nan
    return normalized_energy(u, origin, a * r) / outer


@dataclass
class EnergyProfile:
    radii: NDArray[np.float64]
    energy: NDArray[np.float64]
    omega2: NDArray[np.float64]
    gamma_hat: float = math.nan
    gamma_stderr: float = math.nan
    violations: list[tuple[float, float]] = field(default_factory=list)
    vacuous: bool = False
    u: Optional[ScalarField] = None

    @property
    def band(self) -> tuple[float, float]:
        return self.gamma_hat - 2 * self.gamma_stderr, self.gamma_hat + 2 * self.gamma_stderr

    def is_monotone(self, slack: float = 0.03) -> bool:
        return all(drop <= slack for _, drop in self.violations)

    def to_rows(self) -> list[dict]:
        return [
            {"r": float(r), "E": float(e), "omega2": float(w)}
            for r, e, w in zip(self.radii, self.energy, self.omega2)
        ]

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=["r", "E", "omega2"])
            writer.writeheader()
            for row in self.to_rows():
                writer.writerow({k: format(v, ".17g") for k, v in row.items()})


def _cumulative_energy(u: ScalarField, radii: NDArray[np.float64]) -> NDArray[np.float64]:
    dist = np.linalg.norm(u.edge_midpoints, axis=1)
    order = np.argsort(dist, kind="stable")
    cum = np.concatenate([[0.0], np.cumsum(u.edge_energy[order])])
    return cum[np.searchsorted(dist[order], radii, side="left")]


def _default_radii(u: ScalarField, n: int = SWEEP_POINTS) -> NDArray[np.float64]:
    return np.linspace(8.0 * u.graph.step, 0.95, n)


def energy_profile(
    u: ScalarField,
    radii: Optional[Sequence[float]] = None,
    fit_range: tuple[float, float] = FIT_RANGE,
) -> EnergyProfile:
    """E(r), omega2(0, r) over the sweep, the fitted exponent and every decrease of omega2"""
    r = _default_radii(u) if radii is None else np.asarray(radii, dtype=float)
    lo, hi = 8.0 * u.graph.step, 0.95
    if np.any(r < lo * (1 - 1e-9)) or np.any(r > hi * (1 + 1e-9)):
        raise ValueError(f"Radii must lie in [{lo:.4g}, {hi}]")
    r = np.sort(r)
    E = _cumulative_energy(u, r)
    omega = E / r ** (u.graph.dimension - 1)
    profile = EnergyProfile(r, E, omega, u=u)

    if not np.any(E > 0):
        profile.vacuous = True
        logger.warning("Energy profile is vacuous: zero energy on the sweep")
        return profile

    for i in range(1, len(r)):
        if omega[i] < omega[i - 1]:
            profile.violations.append((float(r[i]), float(1.0 - omega[i] / omega[i - 1])))

    window = (r >= fit_range[0]) & (r <= fit_range[1]) & (omega > 0)
    if window.sum() >= 3:
        fit = linregress(np.log(r[window]), np.log(omega[window]))
        profile.gamma_hat, profile.gamma_stderr = float(fit.slope), float(fit.stderr)
    return profile


@dataclass
class DifferentialReport:
    radii: NDArray[np.float64]
    ratios: NDArray[np.float64]
    max_ratio: float
    vacuous: bool = False
    bound: float = BONNET_BOUND

    def passed(self, tol: float = 0.05) -> bool:
        return self.vacuous or self.max_ratio <= self.bound + tol


def differential_inequality_check(u: ScalarField, radii: Optional[Sequence[float]] = None) -> DifferentialReport:
    """max over the sweep of E(r) / (r E'(r)), E' by centered differences"""
    r = _default_radii(u) if radii is None else np.sort(np.asarray(radii, dtype=float))
    E = _cumulative_energy(u, r)
    if not np.any(E > 0):
        return DifferentialReport(r, np.zeros(0), 0.0, vacuous=True)
    dE = np.gradient(E, r)
    ok = (dE > 0) & (E > 0)
    ratios = E[ok] / (r[ok] * dE[ok])
    return DifferentialReport(r[ok], ratios, float(ratios.max()) if len(ratios) else 0.0)


# ============================================================================
# Boundary Data and Regions
# ============================================================================

def smooth_boundary_data(
    rng: np.random.Generator,
    degree: int = 3,
    dimension: int = 3,
) -> Callable[[NDArray[np.float64]], NDArray[np.float64]]:
    """Random polynomial of total degree <= degree with decaying coefficients"""
    exponents = [
        e for e in itertools.product(range(degree + 1), repeat=dimension) if 0 < sum(e) <= degree
    ]
    coeffs = rng.normal(size=len(exponents)) / np.array([1.0 + sum(e) for e in exponents])
    powers = np.array(exponents, dtype=int)

    def data(pts: NDArray[np.float64]) -> NDArray[np.float64]:
        p = np.atleast_2d(pts)[:, :dimension]
        return np.prod(p[:, None, :] ** powers[None, :, :], axis=2) @ coeffs

    return data


def component_regions(graph: CrackGraph, cone: MinimalCone, gap: float) -> dict[int, int]:
    """Majority analytic cone region of each component, over nodes farther than gap from the cone"""
    clear = cone.distance(graph.positions) > gap
    region = cone_region(cone, graph.positions)
    out = {}
    for k in range(graph.n_components):
        sel = clear & (graph.components == k)
        if np.any(sel):
            out[k] = int(np.argmax(np.bincount(region[sel])))
    return out


# ============================================================================
# Experiments
# ============================================================================

def tube_counterexample(
    eps: float,
    M: float,
    resolution: int,
    radii: Optional[Sequence[float]] = None,
    fit_range: tuple[float, float] = (0.2, 0.9),
) -> EnergyProfile:
    """Two segments y = +-eps across the disk; data M on the left mouth, 0 elsewhere"""
    step = 2.0 / resolution
    if eps < 4 * step:
        raise ResolutionError(f"Tube half-width {eps} is below four cells ({4 * step:.4g})")
    graph = discretize(tube_crack(eps, step / 2), resolution, 2)

    def mouth(pts: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.where((pts[:, 0] < 0) & (np.abs(pts[:, 1]) < eps), M, 0.0)

    u = minimize_energy(graph, mouth)
    sweep = np.linspace(0.2, 0.9, 32) if radii is None else radii
    return energy_profile(u, sweep, fit_range)


@dataclass
class DecayReport:
    r: float
    gamma: float
    tol: float
    values: list[float] = field(default_factory=list)
    vacuous: int = 0
    certified: bool = True

    @property
    def bound(self) -> float:
        return self.r ** self.gamma * (1 + self.tol)

    @property
    def worst(self) -> float:
        return max(self.values) if self.values else math.nan

    @property
    def passed(self) -> bool:
        return bool(self.values) and all(v <= self.bound for v in self.values)


def decay_experiment(
    crack: CrackSet,
    boundary_samples: Sequence[BoundaryData],
    r: float = 0.5,
    *,
    certificate: Optional[FlatnessReport] = None,
    allow_uncertified: bool = False,
    gamma: float = 0.75,
    tol: float = 0.05,
    resolution: int = 64,
    bad: Optional[BadBallFamily] = None,
    rho: float = 0.625,
    U: Optional[float] = None,
    jobs: int = 1,
) -> DecayReport:
    """omega2(0, r) <= r^gamma (1 + tol) for each boundary sample, energy normalized to omega2(0, 1) = 1.

    With bad balls the solve runs on the cut set E^rho.
    """
    certified = certificate is not None and certificate.passed
    if not certified and not allow_uncertified:
        raise CertificateError("decay_experiment needs a passing (eps0, eps)-minimal certificate")

    solve_on = crack
    if bad is not None and len(bad):
        C0 = bad.overlap_constant
        solve_on = build_cut_set(crack, bad, rho, U or 30.0 * C0, C0)
    graph = discretize(solve_on, resolution, crack.dimension)
    origin = np.zeros(graph.dimension)

    def one(data: BoundaryData) -> Optional[float]:
        u = minimize_energy(graph, data)
        total = normalized_energy(u, origin, 1.0)
        if total == 0:
            return None
        return normalized_energy(u, origin, r) / total

    if jobs <= 1:
        results = [one(d) for d in boundary_samples]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(one, boundary_samples))

    report = DecayReport(r, gamma, tol, certified=certified)
    for value in results:
        if value is None:
            report.vacuous += 1
        else:
            report.values.append(value)
    logger.info("decay_experiment: worst %.4g against bound %.4g", report.worst, report.bound)
    return report
