"""
Whitney Extension

The geometric function delta built from bad balls, the Whitney ball family
selected on the crack, its partition of unity, the extension v_k of a
discrete field across the bad zones, and the energy comparison it must
satisfy. Also builds the cut set E^rho used by the decay experiments.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.sparse import csr_matrix
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .crack import CrackSet
from .errors import ExtensionError, LabError, RecenterError
from .flatness import BadBallFamily, FlatnessRecord, FlatnessReport, beta
from .geometry_core import (
    Ball,
    ConeType,
    MinimalCone,
    frame_with_normal,
    is_almost_centered,
    orientation_map,
    recenter,
)
from .rng import make_rng

if TYPE_CHECKING:
    from .harmonic import ScalarField

logger = logging.getLogger(__name__)

RAMP_START = 8.0
RAMP_END = 10.0
CORE_FRACTION = 0.01


def _pad3(pts: ArrayLike) -> NDArray[np.float64]:
    p = np.atleast_2d(np.asarray(pts, dtype=float))
    if p.shape[1] == 2:
        p = np.hstack([p, np.zeros((len(p), 1))])
    return p


# ============================================================================
# Geometric Function
# ============================================================================

@dataclass(eq=False)
class GeometricFunction:
    """delta(x) = max(d(x, boundary of the h-tube around G), sum_i psi_i(x)),
    G = cone0 ∩ B(0, rho), psi_i = r_i on B_i and 0 outside 2B_i."""
    bad: BadBallFamily
    rho: float
    h: float
    cone0: MinimalCone
    dimension: int = 3
    lipschitz_constant: float = 1.0

    def skeleton_distance(self, pts: ArrayLike) -> NDArray[np.float64]:
        """Exact distance to G.

        Every sector is a closed convex cone with apex at the origin, so its
        nearest point in B(0, rho) is the radial clamp of its nearest point.
        """
        p = _pad3(pts)
        best = np.full(len(p), np.inf)
        for sector in self.cone0.sectors:
            q = sector.closest(p)
            norm = np.linalg.norm(q, axis=1)
            scale = np.minimum(1.0, self.rho / np.where(norm > 0, norm, 1.0))
            best = np.minimum(best, np.linalg.norm(p - q * scale[:, None], axis=1))
        return best

    def tube_distance(self, pts: ArrayLike) -> NDArray[np.float64]:
        return np.abs(self.skeleton_distance(pts) - self.h)

    def bump_sum(self, pts: ArrayLike) -> NDArray[np.float64]:
        p = _pad3(pts)
        if not len(self.bad):
            return np.zeros(len(p))
        d = cdist(p, self.bad.centers)
        return np.clip(2.0 * self.bad.radii[None, :] - d, 0.0, self.bad.radii[None, :]).sum(axis=1)

    def __call__(self, pts: ArrayLike) -> NDArray[np.float64]:
        return np.maximum(self.tube_distance(pts), self.bump_sum(pts))

    def measure_lipschitz(self, n_pairs: int = 10_000, seed: int = 0) -> float:
        rng = make_rng(seed, "delta-lipschitz")
        d = self.dimension
        x = rng.normal(size=(n_pairs, d))
        x *= (rng.uniform(size=(n_pairs, 1)) ** (1.0 / d)) / np.linalg.norm(x, axis=1, keepdims=True)
        near = rng.normal(size=(n_pairs, d))
        near *= rng.uniform(1e-4, 1e-2, size=(n_pairs, 1)) / np.linalg.norm(near, axis=1, keepdims=True)
        y = np.concatenate([x + near, x[rng.permutation(n_pairs)]])
        xx = np.concatenate([x, x])
        dist = np.linalg.norm(xx - y, axis=1)
        ok = dist > 0
        slopes = np.abs(self(xx[ok]) - self(y[ok])) / dist[ok]
        return float(slopes.max()) if len(slopes) else 0.0


def build_delta(
    bad: BadBallFamily,
    rho: float,
    h: float,
    cone0: MinimalCone,
    dimension: int = 3,
    n_pairs: int = 10_000,
    seed: int = 0,
) -> GeometricFunction:
    if not 0 < h <= 0.25:
        raise ValueError(f"h must lie in (0, 1/4], got {h}")
    if not 0 < rho <= 1:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    if len(bad) and float(np.max(np.linalg.norm(bad.centers, axis=1) + bad.radii)) > 1.0 + 1e-12:
        raise ValueError("Bad balls must lie inside B(0, 1)")
    if cone0.center_distance(np.zeros(3)) > 1e-12:
        raise ValueError("cone0 must be centered at the origin")
    delta = GeometricFunction(bad, float(rho), float(h), cone0, dimension)
    delta.lipschitz_constant = max(1.0, delta.measure_lipschitz(n_pairs, seed))
    logger.debug("build_delta: %d bad balls, measured C0 = %.4g", len(bad), delta.lipschitz_constant)
    return delta


# ============================================================================
# Whitney Cover
# ============================================================================

@dataclass(eq=False)
class WhitneyCover:
    """Balls W_j = B(x_j, r_j) on the crack with disjoint 1/100-cores"""
    centers: NDArray[np.float64]
    radii: NDArray[np.float64]
    base_radii: NDArray[np.float64]
    U: float
    domain: Ball
    cones: list[Optional[MinimalCone]] = field(default_factory=list)
    orientations: dict[int, Optional[dict[int, int]]] = field(default_factory=dict)
    delta: Optional[GeometricFunction] = None

    def __len__(self) -> int:
        return len(self.radii)

    @property
    def dimension(self) -> int:
        return self.centers.shape[1]

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.centers if len(self.centers) else np.zeros((0, self.dimension)))

    def ball(self, j: int, factor: float = 1.0) -> Ball:
        return Ball(self.centers[j], factor * self.radii[j])

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["x", "y", "z", "r", "cone_type"])
            for j, (c, r) in enumerate(zip(_pad3(self.centers), self.radii)):
                cone = self.cones[j] if j < len(self.cones) else None
                writer.writerow([*(format(float(v), ".17g") for v in (*c, r)), cone.cone_type.name if cone else "-"])

    @classmethod
    def from_csv(cls, path: Union[str, Path], dimension: int = 3, U: float = 30.0) -> "WhitneyCover":
        """Reload centers and radii; cones are not restored"""
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        try:
            centers = np.array([[float(r["x"]), float(r["y"]), float(r["z"])] for r in rows]).reshape(-1, 3)
            radii = np.array([float(r["r"]) for r in rows])
        except (KeyError, ValueError) as e:
            raise ValueError(f"Malformed cover CSV {path}: {e}") from e
        centers = centers[:, :dimension]
        return cls(centers, radii, radii.copy(), U, Ball(np.zeros(dimension), 1.0))


def _default_cone(crack: CrackSet, x: NDArray[np.float64], r: float) -> MinimalCone:
    """Best cone through x at scale r (nearest segment line in 2D)"""
    if crack.dimension == 3:
        return beta(crack, x, r, n_starts=2)[1]
    idx = crack.simplices_near(Ball(x, r))
    seg = crack.triangles[idx] if len(idx) else crack.triangles
    mid = seg.mean(axis=1)
    s = seg[int(np.argmin(np.linalg.norm(mid - x, axis=1)))]
    d = (s[1] - s[0]) / np.linalg.norm(s[1] - s[0])
    return MinimalCone(ConeType.P, np.append(x, 0.0), frame_with_normal([-d[1], d[0], 0.0]))


def select_whitney_balls(
    crack: CrackSet,
    delta: GeometricFunction,
    U: float,
    domain: Ball,
    *,
    V: float = 2.0,
    cone_source: Optional[Callable[[NDArray, float], MinimalCone]] = None,
    orient: bool = False,
    cone0: Optional[MinimalCone] = None,
    eps0: float = 1e-2,
) -> WhitneyCover:
    """Greedy maximal family in decreasing delta order (ties by center),
    then per-ball recentering so each cone is almost centered in its ball."""
    if U < 30.0 * delta.lipschitz_constant * (1.0 - 1e-9):
        raise ValueError(f"U = {U} is below 30*C0 = {30.0 * delta.lipschitz_constant:.4g}")
    dim = crack.dimension
    pts = crack.samples_in_ball(domain)
    values = delta(pts) if len(pts) else np.zeros(0)
    keep = values > 0
    pts, values = pts[keep], values[keep]
    order = np.lexsort(tuple(pts[:, d] for d in reversed(range(dim))) + (-values,))

    core_r = CORE_FRACTION * values / U
    chosen: list[int] = []
    chosen_pts = np.zeros((0, dim))
    chosen_core = np.zeros(0)
    for i in order:
        if len(chosen):
            gap = np.linalg.norm(chosen_pts - pts[i], axis=1)
            if np.any(gap < chosen_core + core_r[i]):
                continue
        chosen.append(int(i))
        chosen_pts = np.vstack([chosen_pts, pts[i]])
        chosen_core = np.append(chosen_core, core_r[i])

    centers = pts[chosen] if chosen else np.zeros((0, dim))
    base = values[chosen] / U if chosen else np.zeros(0)
    radii = base.copy()
    source = cone_source or (lambda x, r: _default_cone(crack, x, r))
    cones: list[Optional[MinimalCone]] = []
    for j, (x, r) in enumerate(zip(centers, base)):
        try:
            r1, cone = recenter(source(x, r), x, r, V)
            radii[j] = r1
        except (RecenterError, LabError) as e:
            logger.warning("Whitney ball %d at %s kept uncentered: %s", j, x.tolist(), e)
            cone = None
        cones.append(cone)

    cover = WhitneyCover(centers, radii, base, float(U), domain, cones, delta=delta)
    if orient and cone0 is not None:
        for j, cone in enumerate(cones):
            if cone is None:
                continue
            try:
                cover.orientations[j] = orientation_map(
                    crack, (cover.ball(j), cone), (domain, cone0), eps0,
                    chain_cone=lambda b: source(b.center, b.radius),
                )
            except LabError as e:
                logger.warning("No orientation for Whitney ball %d: %s", j, e)
                cover.orientations[j] = None
    logger.info("select_whitney_balls: %d balls from %d candidates", len(cover), len(pts))
    return cover


# ============================================================================
# Partition of Unity
# ============================================================================

def ramp(t: ArrayLike) -> NDArray[np.float64]:
    """Quintic smoothstep: 0 on [0, 8], 1 on [10, inf)"""
    s = np.clip((np.asarray(t, dtype=float) - RAMP_START) / (RAMP_END - RAMP_START), 0.0, 1.0)
    return s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)


@dataclass
class PartitionValues:
    """phi0 and the bumps phi_j at N points; theta are the normalized weights"""
    phi0: NDArray[np.float64]
    phi: csr_matrix

    @property
    def total(self) -> NDArray[np.float64]:
        return self.phi0 + np.asarray(self.phi.sum(axis=1)).ravel()

    @property
    def theta0(self) -> NDArray[np.float64]:
        return self.phi0 / self.total

    @property
    def theta(self) -> csr_matrix:
        return csr_matrix(self.phi.multiply(1.0 / self.total[:, None]))


def partition_matrix(cover: WhitneyCover, pts: ArrayLike) -> PartitionValues:
    p = np.atleast_2d(np.asarray(pts, dtype=float))[:, : cover.dimension]
    n, J = len(p), len(cover)
    phi0 = np.ones(n)
    if J == 0:
        return PartitionValues(phi0, csr_matrix((n, 0)))
    reach = RAMP_END * float(cover.radii.max())
    rows, cols = [], []
    for i, hits in enumerate(cover.tree.query_ball_point(p, reach)):
        rows.extend([i] * len(hits))
        cols.extend(hits)
    rows_a = np.asarray(rows, dtype=np.int64)
    cols_a = np.asarray(cols, dtype=np.int64)
    t = np.linalg.norm(p[rows_a] - cover.centers[cols_a], axis=1) / cover.radii[cols_a] if len(rows_a) else np.zeros(0)
    active = t < RAMP_END
    rows_a, cols_a, t = rows_a[active], cols_a[active], t[active]
    l = ramp(t)
    np.multiply.at(phi0, rows_a, l)
    phi = csr_matrix((1.0 - l, (rows_a, cols_a)), shape=(n, J))
    phi.eliminate_zeros()
    return PartitionValues(phi0, phi)


def evaluate_partition(cover: WhitneyCover, x: ArrayLike) -> tuple[float, dict[int, float]]:
    """(phi0(x), {j: theta_j(x)}) with weights only for x in 10W_j"""
    values = partition_matrix(cover, np.atleast_2d(x))
    row = values.theta.getrow(0).tocoo()
    return float(values.phi0[0]), {int(j): float(w) for j, w in zip(row.col, row.data)}


# ============================================================================
# Neighborhoods
# ============================================================================

def neighborhood_mask(
    points: ArrayLike,
    crack: CrackSet,
    delta: GeometricFunction,
    U: float,
    t: float,
    rho: Optional[float] = None,
) -> NDArray[np.bool_]:
    """Membership in V(t), the union of B(y, t*delta(y)/U) over crack samples y in B(0, rho)"""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    ys = crack.samples
    if rho is not None and len(ys):
        ys = ys[np.linalg.norm(ys, axis=1) < rho]
    if not len(ys) or not len(p):
        return np.zeros(len(p), dtype=bool)
    radius = t * delta(ys) / U
    pairs = cKDTree(p).sparse_distance_matrix(cKDTree(ys), float(radius.max()), output_type="coo_matrix")
    hit = pairs.data < radius[pairs.col]
    out = np.zeros(len(p), dtype=bool)
    out[pairs.row[hit]] = True
    return out


def _boundary_touching(
    points: NDArray, crack: CrackSet, delta: GeometricFunction, U: float, rho: float
) -> NDArray[np.bool_]:
    """Membership in the union of B(y, 10 delta(y)/U) that meet the sphere |x| = rho"""
    ys = crack.samples
    if not len(ys):
        return np.zeros(len(points), dtype=bool)
    radius = 10.0 * delta(ys) / U
    touch = np.abs(np.linalg.norm(ys, axis=1) - rho) <= radius
    if not np.any(touch):
        return np.zeros(len(points), dtype=bool)
    ys, radius = ys[touch], radius[touch]
    pairs = cKDTree(points).sparse_distance_matrix(cKDTree(ys), float(radius.max()), output_type="coo_matrix")
    hit = pairs.data < radius[pairs.col]
    out = np.zeros(len(points), dtype=bool)
    out[pairs.row[hit]] = True
    return out


# ============================================================================
# Extension
# ============================================================================

@dataclass(eq=False)
class ExtensionField:
    """v_k = theta0*u + sum_j m_j*theta_j on the nodes of u's graph.

    Balls whose annulus misses component k carry NaN anchors and give
    their weight back to u.
    """
    u: "ScalarField"
    cover: WhitneyCover
    component: int
    anchors: NDArray[np.float64]
    means: NDArray[np.float64]

    @cached_property
    def partition(self) -> PartitionValues:
        return partition_matrix(self.cover, self.u.graph.positions)

    def values(self) -> NDArray[np.float64]:
        part = self.partition
        theta = part.theta
        active = ~np.isnan(self.means)
        m = np.where(active, self.means, 0.0)
        share = part.theta0 + np.asarray(theta @ (~active).astype(float)).ravel()
        return share * self.u.values + theta @ m

    def __call__(self, pts: ArrayLike) -> NDArray[np.float64]:
        """Evaluate at arbitrary points, taking u from the cell holding each point"""
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        nodes = self.u.graph.locate(p)
        if np.any(nodes < 0):
            raise ValueError("Points outside the field's grid")
        part = partition_matrix(self.cover, p)
        theta = part.theta
        active = ~np.isnan(self.means)
        share = part.theta0 + np.asarray(theta @ (~active).astype(float)).ravel()
        return share * self.u.values[nodes] + theta @ np.where(active, self.means, 0.0)


def build_extension(u: "ScalarField", cover: WhitneyCover, k: int, disk_fraction: float = 0.01) -> ExtensionField:
    """Anchor a_k^j: the node of component k in 10W_j minus 8W_j farthest from
    the crack, required at distance >= 7 r_j (1 - 2 step / r_j). m_k^j is the
    mean of u over the nodes of component k within disk_fraction * r_j."""
    graph = u.graph
    crack = u.crack
    if not 0 <= k < graph.n_components:
        raise ValueError(f"Component {k} out of range [0, {graph.n_components})")
    pos = graph.positions
    tree = cKDTree(pos)
    in_k = graph.components == k
    J = len(cover)
    anchors = np.full((J, pos.shape[1]), np.nan)
    means = np.full(J, np.nan)
    for j in range(J):
        x, r = cover.centers[j], cover.radii[j]
        idx = np.asarray(tree.query_ball_point(x, RAMP_END * r), dtype=np.int64)
        if not len(idx):
            continue
        dist = np.linalg.norm(pos[idx] - x, axis=1)
        ring = idx[(dist >= RAMP_START * r) & in_k[idx]]
        if not len(ring):
            continue
        clearance = crack.distance(pos[ring]) if not crack.is_empty else np.full(len(ring), np.inf)
        best = int(np.argmax(clearance))
        need = 7.0 * r * (1.0 - 2.0 * graph.step / r)
        if clearance[best] < need:
            raise ExtensionError(
                f"No anchor for ball {j} in component {k}: best clearance {clearance[best]:.4g} < {need:.4g}"
            )
        a = pos[ring[best]]
        disk = np.asarray(tree.query_ball_point(a, disk_fraction * r), dtype=np.int64)
        disk = disk[in_k[disk]] if len(disk) else disk
        if not len(disk):
            disk = np.array([ring[best]])
        anchors[j] = a
        means[j] = float(np.mean(u.values[disk]))
    logger.debug("build_extension: %d of %d balls anchored for component %d", int(np.sum(~np.isnan(means))), J, k)
    return ExtensionField(u, cover, k, anchors, means)


@dataclass
class EnergyComparison:
    lhs: float
    rhs_main: float
    rhs_zone: float
    empirical_C: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.lhs, self.rhs_main, self.rhs_zone, self.empirical_C


def _edge_energy(values: NDArray, edges: NDArray, mask: NDArray[np.bool_], step: float, dim: int) -> float:
    sel = mask[edges[:, 0]] & mask[edges[:, 1]]
    diff = values[edges[sel, 1]] - values[edges[sel, 0]]
    return float(np.sum((diff / step) ** 2) * step ** dim)


def energy_comparison(
    u: "ScalarField",
    ext: ExtensionField,
    cover: WhitneyCover,
    k: int,
    rho: float,
) -> EnergyComparison:
    """Energies of v_k on Delta_k minus V_rho, of u on Delta_k minus V(1/3),
    and of u on Z = V(30) minus V(1/10), with the empirical constant."""
    if ext.u.graph is not u.graph or ext.cover is not cover or ext.component != k:
        raise ValueError("Extension was built on a different grid, cover or component")
    if cover.delta is None:
        raise ValueError("Cover carries no geometric function")
    graph, crack, delta, U = u.graph, u.crack, cover.delta, cover.U
    pos = graph.positions
    origin = np.zeros(pos.shape[1])
    in_rho = np.linalg.norm(pos - origin, axis=1) < rho

    near = {t: neighborhood_mask(pos, crack, delta, U, t, rho) for t in (10.0, 1.0 / 3.0, 30.0, 0.1)}
    delta_k = in_rho & ((graph.components == k) | near[10.0])
    v_rho = _boundary_touching(pos, crack, delta, U, rho)
    zone = near[30.0] & ~near[0.1]

    dim, step = graph.dimension, graph.step
    lhs = _edge_energy(ext.values(), graph.edges, delta_k & ~v_rho, step, dim)
    rhs_main = _edge_energy(u.values, graph.edges, delta_k & ~near[1.0 / 3.0], step, dim)
    rhs_zone = _edge_energy(u.values, graph.edges, zone, step, dim)
    excess = lhs - rhs_main
    if excess <= 0:
        empirical = 0.0
    elif rhs_zone > 0:
        empirical = excess / rhs_zone
    else:
        empirical = math.inf
    return EnergyComparison(lhs, rhs_main, rhs_zone, empirical)


# ============================================================================
# Cover Checks and Cut Sets
# ============================================================================

@dataclass
class CoverReport:
    checks: dict[str, bool] = field(default_factory=dict)
    values: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def violations(self) -> list[str]:
        return [name for name, ok in self.checks.items() if not ok]


def check_cover(
    cover: WhitneyCover,
    crack: CrackSet,
    *,
    t: float = 1.0,
    n_probe: int = 2000,
    overlap_bound: Optional[float] = None,
    eps0: Optional[float] = None,
    r0: float = 1.0,
    seed: int = 0,
) -> CoverReport:
    """Core disjointness, maximality, radius comparability, bounded overlap,
    the V(t) inclusions, centering, and (with eps0) beta <= U*eps0 above r_j."""
    report = CoverReport()
    delta = cover.delta
    c, base, r = cover.centers, cover.base_radii, cover.radii
    J = len(cover)

    if J > 1:
        d = cdist(c, c)
        np.fill_diagonal(d, np.inf)
        report.checks["cores"] = bool(np.all(d >= CORE_FRACTION * (base[:, None] + base[None, :]) * (1 - 1e-12)))
        meet = d < RAMP_END * (r[:, None] + r[None, :])
        ratio = r[None, :] / r[:, None]
        report.checks["comparable"] = bool(np.all((ratio[meet] >= 1 / 20) & (ratio[meet] <= 20)))
        report.values["min_ratio"] = float(ratio[meet].min()) if np.any(meet) else 1.0
    else:
        report.checks["cores"] = True
        report.checks["comparable"] = True

    if delta is not None:
        pts = crack.samples_in_ball(cover.domain)
        vals = delta(pts) if len(pts) else np.zeros(0)
        ok = vals > 0
        pts, core = pts[ok], CORE_FRACTION * vals[ok] / cover.U
        if J and len(pts):
            gap = cdist(pts, c)
            report.checks["maximal"] = bool(np.all(np.any(gap < core[:, None] + CORE_FRACTION * base[None, :] + 1e-12, axis=1)))
        else:
            report.checks["maximal"] = not len(pts)

    rng = make_rng(seed, "cover-probe")
    dim = cover.dimension
    probes = rng.normal(size=(n_probe, dim))
    probes *= cover.domain.radius * rng.uniform(size=(n_probe, 1)) ** (1 / dim) / np.linalg.norm(probes, axis=1, keepdims=True)
    probes += cover.domain.center[:dim]
    if J:
        seeds = np.repeat(c, 4, axis=0) + rng.uniform(-1, 1, size=(4 * J, dim)) * np.repeat(RAMP_END * r, 4)[:, None]
        probes = np.vstack([probes, seeds])
        counts = (cdist(probes, c) < RAMP_END * r[None, :]).sum(axis=1)
        report.values["overlap"] = float(counts.max())
        if overlap_bound is not None:
            report.checks["overlap"] = bool(counts.max() <= overlap_bound)

    if delta is not None and J:
        in_tw = np.any(cdist(probes, c) < t * base[None, :], axis=1)
        in_v = neighborhood_mask(probes, crack, delta, cover.U, t)
        outer = np.any(cdist(probes, c) < (20 * t + 0.3) * base[None, :], axis=1)
        report.checks["inclusion"] = bool(np.all(in_v[in_tw]) and np.all(outer[in_v]))

    centered = [
        cone is not None and is_almost_centered(cone, Ball(_pad3(c[j])[0], r[j]))
        for j, cone in enumerate(cover.cones)
    ]
    report.checks["centered"] = all(centered)

    if eps0 is not None and crack.dimension == 3:
        worst = 0.0
        for j in range(J):
            radius = r[j]
            while radius <= r0 / 4:
                worst = max(worst, beta(crack, c[j], radius, n_starts=2)[0])
                radius *= 2
        report.values["beta"] = worst
        report.checks["flatness"] = worst <= cover.U * eps0

    if report.violations:
        logger.info("check_cover violations: %s", ", ".join(report.violations))
    return report


def check_hypothesis_h(
    crack: CrackSet,
    delta: GeometricFunction,
    eps0: float,
    r0: float = 1.0,
    n_points: int = 8,
    *,
    n_starts: int = 4,
    seed: int = 0,
) -> FlatnessReport:
    """beta(x, r) <= eps0 for delta(x) <= r <= r0/4 at sampled crack points"""
    if crack.dimension != 3:
        raise ValueError("Hypothesis H is checked on 3D cracks")
    rng = make_rng(seed, "hypothesis-h")
    pts = crack.samples_in_ball(Ball(np.zeros(3), r0 / 2))
    report = FlatnessReport("hypothesis-h", eps0)
    if not len(pts):
        return report
    picks = np.sort(rng.choice(len(pts), min(n_points, len(pts)), replace=False))
    records = []
    for x in pts[picks]:
        radius = float(delta(x[None, :])[0])
        while 0 < radius <= r0 / 4:
            value, cone = beta(crack, x, radius, n_starts=n_starts, seed=seed)
            records.append(FlatnessRecord(x, radius, value, eps0, cone, "H"))
            radius *= 2
    report.add(records)
    return report


def c1_inflation(bad: BadBallFamily, U: float, C0: float) -> float:
    """C1 = 2 + 10 C0 / U"""
    if U <= 0:
        raise ValueError(f"U must be positive, got {U}")
    return 2.0 + 10.0 * C0 / U


def _sphere_simplices(center: NDArray, radius: float, h: float, dim: int) -> NDArray[np.float64]:
    if dim == 2:
        n = max(8, math.ceil(2 * math.pi * radius / h))
        a = np.linspace(0, 2 * math.pi, n + 1)
        pts = center + radius * np.column_stack([np.cos(a), np.sin(a)])
        return np.stack([pts[:-1], pts[1:]], axis=1)
    n_t = max(4, math.ceil(math.pi * radius / h))
    n_p = max(8, math.ceil(2 * math.pi * radius / h))
    th = np.linspace(0, math.pi, n_t + 1)
    ph = np.linspace(0, 2 * math.pi, n_p + 1)
    T, P = np.meshgrid(th, ph, indexing="ij")
    grid = center + radius * np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
    p00, p10 = grid[:-1, :-1].reshape(-1, 3), grid[1:, :-1].reshape(-1, 3)
    p01, p11 = grid[:-1, 1:].reshape(-1, 3), grid[1:, 1:].reshape(-1, 3)
    return np.concatenate([np.stack([p00, p10, p11], 1), np.stack([p00, p11, p01], 1)])


def build_cut_set(
    crack: CrackSet,
    bad: BadBallFamily,
    rho: float,
    U: float,
    C0: float,
    h: Optional[float] = None,
) -> CrackSet:
    """E^rho: inside each B'_i = C1 B_i meeting the sphere |x| = rho the crack
    is replaced by the sphere bounding B'_i."""
    if not 0.5 <= rho <= 0.75:
        raise ValueError(f"rho must lie in [1/2, 3/4], got {rho}")
    c1 = c1_inflation(bad, U, C0)
    dim = crack.dimension
    h = h or crack.h
    centers = bad.centers[:, :dim]
    radii = c1 * bad.radii
    meets = np.abs(np.linalg.norm(centers, axis=1) - rho) <= radii
    if not np.any(meets):
        return crack
    tris = crack.triangles
    mid = tris.mean(axis=1)
    swallowed = np.any(cdist(mid, centers[meets]) < radii[meets][None, :], axis=1)
    spheres = [_sphere_simplices(c, r, min(h, r / 4), dim) for c, r in zip(centers[meets], radii[meets])]
    logger.debug("build_cut_set: %d balls replaced by spheres, %d simplices removed", int(meets.sum()), int(swallowed.sum()))
    return CrackSet.from_triangles(np.concatenate([tris[~swallowed], *spheres]), min(crack.h, h), dim)
