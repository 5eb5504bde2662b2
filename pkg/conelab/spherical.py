"""
Spherical Eigenvalues

Triangulated spherical domains cut out by minimal cones (hemispheres, lunes
and spherical triangles), P1 cotangent assembly, the first positive
Laplace-Beltrami eigenvalue with mixed boundary conditions, and Poincare
ratios.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.sparse import coo_matrix, csc_matrix, csr_matrix
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigsh, splu
from scipy.spatial import cKDTree

from .errors import GeometryError, SpectralError
from .geometry_core import TETRA_VERTICES, Y_SHEETS, ConeType, MinimalCone
from .rng import make_rng

logger = logging.getLogger(__name__)

CUT_ARC = -1
SHIFT = -0.1
N_EIGS = 4
MULTIPLICITY_TOL = 1e-3


def _unit_rows(v: NDArray[np.float64]) -> NDArray[np.float64]:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def spherical_angle(apex: ArrayLike, b: ArrayLike, c: ArrayLike) -> float:
    """Angle at `apex` between the great-circle arcs towards b and c"""
    a = np.asarray(apex, dtype=float)
    a = a / np.linalg.norm(a)
    tb = np.asarray(b, dtype=float) - (np.asarray(b, dtype=float) @ a) * a
    tc = np.asarray(c, dtype=float) - (np.asarray(c, dtype=float) @ a) * a
    cosang = float(tb @ tc / (np.linalg.norm(tb) * np.linalg.norm(tc)))
    return math.acos(max(-1.0, min(1.0, cosang)))


# ============================================================================
# Seeds and Refinement
# ============================================================================

@dataclass
class Seed:
    """Coarse spherical triangulation on the unit sphere; boundary edges carry arc ids"""
    vertices: NDArray[np.float64]
    triangles: NDArray[np.int64]
    boundary: NDArray[np.int64]
    arcs: NDArray[np.int64]
    corners: NDArray[np.int64] = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def edge_length(self) -> float:
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        chords = np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)
        return float(np.max(2 * np.arcsin(np.clip(chords / 2, 0, 1))))


def _seed(vertices: ArrayLike, triangles: ArrayLike, arcs: dict[tuple[int, int], int], corners: Sequence[int] = ()) -> Seed:
    edges = np.array(list(arcs.keys()), dtype=np.int64).reshape(-1, 2)
    return Seed(
        _unit_rows(np.asarray(vertices, dtype=float)),
        np.asarray(triangles, dtype=np.int64),
        edges,
        np.array(list(arcs.values()), dtype=np.int64),
        np.asarray(corners, dtype=np.int64),
    )


def _subdivide(
    verts: NDArray[np.float64],
    tris: NDArray[np.int64],
    bedges: NDArray[np.int64],
    barcs: NDArray[np.int64],
) -> tuple[NDArray, NDArray, NDArray, NDArray]:
    """Split every triangle in four at great-circle edge midpoints"""
    m = len(tris)
    e = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    uniq, inv = np.unique(e, axis=0, return_inverse=True)
    inv = np.asarray(inv).reshape(-1)
    mids = _unit_rows(verts[uniq[:, 0]] + verts[uniq[:, 1]])
    mid_id = len(verts) + np.arange(len(uniq))
    m01, m12, m20 = mid_id[inv[:m]], mid_id[inv[m:2 * m]], mid_id[inv[2 * m:]]
    t0, t1, t2 = tris[:, 0], tris[:, 1], tris[:, 2]
    new_tris = np.concatenate([
        np.column_stack([t0, m01, m20]),
        np.column_stack([m01, t1, m12]),
        np.column_stack([m20, m12, t2]),
        np.column_stack([m01, m12, m20]),
    ])
    n = len(verts)
    keys = uniq[:, 0] * n + uniq[:, 1]
    b = np.sort(bedges, axis=1)
    pos = np.searchsorted(keys, b[:, 0] * n + b[:, 1])
    bm = mid_id[pos]
    new_b = np.concatenate([np.column_stack([b[:, 0], bm]), np.column_stack([bm, b[:, 1]])])
    return np.vstack([verts, mids]), new_tris, new_b, np.concatenate([barcs, barcs])


def _hemisphere_seed(pole: NDArray, e1: NDArray, e2: NDArray, arc: int = 0) -> Seed:
    ring = [e1, e2, -e1, -e2]
    verts = [pole, *ring]
    tris = [[0, 1 + k, 1 + (k + 1) % 4] for k in range(4)]
    arcs = {(1 + k, 1 + (k + 1) % 4): arc for k in range(4)}
    return _seed(verts, tris, arcs)


def _lune_seed(R: NDArray, k: int, half: bool = False) -> Seed:
    a0, a1 = 2 * math.pi * k / 3, 2 * math.pi * (k + 1) / 3
    north, south = R[:, 2], -R[:, 2]
    d0 = R @ np.array([math.cos(a0), math.sin(a0), 0.0])
    d1 = R @ np.array([math.cos(a1), math.sin(a1), 0.0])
    mid = R @ np.array([math.cos((a0 + a1) / 2), math.sin((a0 + a1) / 2), 0.0])
    if half:
        verts = [north, d0, mid, d1]
        tris = [[0, 1, 2], [0, 2, 3]]
        arcs = {(0, 1): 0, (0, 3): 1, (1, 2): CUT_ARC, (2, 3): CUT_ARC}
        return _seed(verts, tris, arcs, [0, 1, 3])
    verts = [north, south, d0, mid, d1]
    tris = [[0, 2, 3], [0, 3, 4], [1, 3, 2], [1, 4, 3]]
    arcs = {(0, 2): 0, (1, 2): 0, (0, 4): 1, (1, 4): 1}
    return _seed(verts, tris, arcs, [0, 1])


def _triangle_seed(R: NDArray, i: int, axis: Optional[int] = None) -> Seed:
    """Spherical triangle opposite A_i, fanned around its centroid through the
    edge midpoints so every symmetry axis runs along mesh edges. With `axis`,
    only the half on one side of the axis through that corner."""
    corner_ids = [j for j in range(4) if j != i]
    A = [R @ TETRA_VERTICES[j] for j in corner_ids]
    M = [A[(s + 1) % 3] + A[(s + 2) % 3] for s in range(3)]
    center = A[0] + A[1] + A[2]
    verts = [center, *A, *M]
    # corner s -> index 1 + s; midpoint opposite corner s -> index 4 + s
    tris, arcs = [], {}
    for s in range(3):
        a, b = (s + 1) % 3, (s + 2) % 3
        m = 4 + s
        tris.append([0, 1 + a, m])
        tris.append([0, m, 1 + b])
        arcs[(1 + a, m)] = s
        arcs[(m, 1 + b)] = s
    if axis is None:
        return _seed(verts, tris, arcs, [1, 2, 3])

    # keep the side of the plane through corner `axis`, the centroid and the
    # opposite midpoint that contains the next corner
    s0 = axis
    plane_n = np.cross(A[s0], M[s0])
    side = lambda p: float(np.dot(plane_n, p))
    keep_sign = math.copysign(1.0, side(A[(s0 + 1) % 3]))
    kept = [t for t in tris if all(side(np.asarray(verts[v]) / np.linalg.norm(verts[v])) * keep_sign > -1e-12 for v in t)]
    kept_edges = {tuple(sorted(e)) for t in kept for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0]))}
    half_arcs = {e: arc for e, arc in arcs.items() if tuple(sorted(e)) in kept_edges}
    half_arcs[(1 + s0, 0)] = CUT_ARC
    half_arcs[(0, 4 + s0)] = CUT_ARC
    used = sorted({v for t in kept for v in t})
    remap = {v: n for n, v in enumerate(used)}
    return _seed(
        [verts[v] for v in used],
        [[remap[v] for v in t] for t in kept],
        {(remap[a], remap[b]): arc for (a, b), arc in half_arcs.items()},
        [remap[1 + s0], remap[1 + (s0 + 1) % 3]],
    )


def _octahedron_seed() -> Seed:
    verts = np.vstack([np.eye(3), -np.eye(3)])
    tris = []
    for sx in (0, 3):
        for sy in (1, 4):
            for sz in (2, 5):
                tris.append([sx, sy, sz])
    return _seed(verts, tris, {})


# ============================================================================
# Surface Mesh
# ============================================================================

@dataclass(eq=False)
class SurfaceMesh:
    """Triangulated spherical domain of radius `radius` around `center`"""
    vertices: NDArray[np.float64]
    triangles: NDArray[np.int64]
    boundary_edges: NDArray[np.int64]
    edge_arcs: NDArray[np.int64]
    radius: float
    center: NDArray[np.float64]
    dirichlet_arcs: frozenset[int] = frozenset()
    seed: Optional[Seed] = None
    level: int = 0

    @property
    def edge_tags(self) -> NDArray[np.str_]:
        dirichlet = np.isin(self.edge_arcs, list(self.dirichlet_arcs))
        return np.where(dirichlet, "dirichlet", "neumann")

    @property
    def is_pure_neumann(self) -> bool:
        return not np.any(self.edge_tags == "dirichlet")

    @cached_property
    def dirichlet_vertices(self) -> NDArray[np.int64]:
        edges = self.boundary_edges[self.edge_tags == "dirichlet"]
        return np.unique(edges.reshape(-1))

    @cached_property
    def areas(self) -> NDArray[np.float64]:
        p = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def h(self) -> float:
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return float(np.max(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)))

    @cached_property
    def stiffness(self) -> csr_matrix:
        """P1 cotangent stiffness"""
        p = self.vertices[self.triangles]
        rows, cols, vals = [], [], []
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            u, v = p[:, j] - p[:, i], p[:, k] - p[:, i]
            cot = np.einsum("ij,ij->i", u, v) / np.linalg.norm(np.cross(u, v), axis=1)
            a, b = self.triangles[:, j], self.triangles[:, k]
            w = 0.5 * cot
            rows += [a, b, a, b]
            cols += [b, a, a, b]
            vals += [-w, -w, w, w]
        n = len(self.vertices)
        return coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()

    @cached_property
    def mass(self) -> csr_matrix:
        """P1 consistent mass"""
        rows, cols, vals = [], [], []
        for i in range(3):
            for j in range(3):
                rows.append(self.triangles[:, i])
                cols.append(self.triangles[:, j])
                vals.append(self.areas * (2.0 if i == j else 1.0) / 12.0)
        n = len(self.vertices)
        return coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()

    def validate(self) -> None:
        t = self.triangles
        e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        _, counts = np.unique(e, axis=0, return_counts=True)
        if np.any(counts > 2):
            raise SpectralError(f"Non-manifold mesh: {int(np.sum(counts > 2))} edges shared by more than two triangles")
        off = np.abs(np.linalg.norm(self.vertices - self.center, axis=1) - self.radius)
        if float(off.max()) > 1e-9 * self.radius:
            raise SpectralError(f"Vertex off the sphere by {float(off.max()):.3e}")

    def scaled(self, s: float) -> "SurfaceMesh":
        return SurfaceMesh(
            self.center + s * (self.vertices - self.center), self.triangles, self.boundary_edges,
            self.edge_arcs, s * self.radius, self.center, self.dirichlet_arcs, self.seed, self.level,
        )

    def coarsen(self) -> "SurfaceMesh":
        """The same domain one bisection level down"""
        if self.seed is None or self.level < 1:
            raise ValueError("Mesh has no coarser level")
        return _refine(self.seed, self.level - 1, self.radius, self.center, self.dirichlet_arcs)

    def export_off(self, path: Union[str, Path]) -> None:
        lines = ["OFF", f"{len(self.vertices)} {len(self.triangles)} 0"]
        lines += [" ".join(format(float(c), ".17g") for c in v) for v in self.vertices]
        lines += [f"3 {a} {b} {c}" for a, b, c in self.triangles]
        Path(path).write_text("\n".join(lines) + "\n")


def _refine(seed: Seed, level: int, radius: float, center: NDArray, dirichlet: frozenset[int]) -> SurfaceMesh:
    verts, tris, bedges, barcs = seed.vertices, seed.triangles, seed.boundary, seed.arcs
    for _ in range(level):
        verts, tris, bedges, barcs = _subdivide(verts, tris, bedges, barcs)
    mesh = SurfaceMesh(center + radius * verts, tris, bedges, barcs, float(radius), center, dirichlet, seed, level)
    mesh.validate()
    return mesh


def _level_for(seed: Seed, radius: float, target_h: float) -> int:
    if target_h <= 0:
        raise ValueError(f"target_h must be positive, got {target_h}")
    return max(0, math.ceil(math.log2(max(seed.edge_length() * radius / target_h, 1.0))))


def _cone_seed(cone: MinimalCone, component: int, axis: Optional[int] = None) -> Seed:
    R = cone.rotation
    n_comp = {ConeType.P: 2, ConeType.Y: 3, ConeType.T: 4}[cone.cone_type]
    if not 0 <= component < n_comp:
        raise ValueError(f"Component {component} invalid for a {cone.cone_type.name} cone ({n_comp} components)")
    if cone.cone_type == ConeType.P:
        pole = R[:, 1] if component == 0 else -R[:, 1]
        if axis is None:
            return _hemisphere_seed(pole, R[:, 0], R[:, 2])
        return _lune_quarter(pole, R[:, 0], R[:, 2])
    if cone.cone_type == ConeType.Y:
        return _lune_seed(R, component, half=axis is not None)
    return _triangle_seed(R, component, axis)


def _lune_quarter(pole: NDArray, e1: NDArray, e2: NDArray) -> Seed:
    """Half of a hemisphere, cut along the meridian through e2"""
    verts = [pole, e2, e1, -e2]
    tris = [[0, 1, 2], [0, 2, 3]]
    arcs = {(1, 2): 0, (2, 3): 0, (0, 1): CUT_ARC, (0, 3): CUT_ARC}
    return _seed(verts, tris, arcs, [0])


def mesh_domain(
    cone: MinimalCone,
    r: float = 1.0,
    component: int = 0,
    target_h: float = 0.1,
    dirichlet_arcs: Sequence[int] = (),
) -> SurfaceMesh:
    """Component of the sphere of radius r around the cone center minus the cone.

    Boundary arcs are numbered per domain (sheet or edge index); the listed
    ones are Dirichlet, the rest Neumann.
    """
    seed = _cone_seed(cone, component)
    return _refine(seed, _level_for(seed, r, target_h), r, cone.center.copy(), frozenset(dirichlet_arcs))


def mesh_sphere(r: float = 1.0, target_h: float = 0.1, center: Optional[ArrayLike] = None) -> SurfaceMesh:
    seed = _octahedron_seed()
    c = np.zeros(3) if center is None else np.asarray(center, dtype=float)
    return _refine(seed, _level_for(seed, r, target_h), r, c, frozenset())


def mesh_half_domain(
    cone: Optional[MinimalCone],
    component: int = 0,
    axis: int = 0,
    r: float = 1.0,
    target_h: float = 0.1,
) -> SurfaceMesh:
    """A domain cut along a symmetry great circle, Dirichlet on the cut.

    No cone: the upper hemisphere of the full sphere. Y: the half-lune above
    the equator. T: the half of the triangle on one side of the axis through
    corner `axis`. P: a quarter sphere cut along a meridian.
    """
    if cone is None:
        seed = _hemisphere_seed(np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), CUT_ARC)
        center = np.zeros(3)
    else:
        seed = _cone_seed(cone, component, axis)
        center = cone.center.copy()
    return _refine(seed, _level_for(seed, r, target_h), r, center, frozenset({CUT_ARC}))


# ============================================================================
# Eigenvalues
# ============================================================================

@dataclass
class SpectralResult:
    lambda1: float
    eigenvector: NDArray[np.float64]
    h: float
    eigenvalues: NDArray[np.float64]
    rayleigh: float
    extrapolated: Optional[float] = None
    coarse_lambda1: Optional[float] = None

    @property
    def multiplicity(self) -> int:
        return int(np.sum(np.abs(self.eigenvalues - self.lambda1) <= MULTIPLICITY_TOL * self.lambda1))

    def to_json(self) -> dict:
        return {"lambda1": self.lambda1, "h": self.h, "extrapolated": self.extrapolated}


def _shift_invert(K: csc_matrix, M: csc_matrix, deflate: bool) -> LinearOperator:
    """(K - sigma M)^-1, followed by the M-orthogonal projection off constants"""
    lu = splu(csc_matrix(K - SHIFT * M))
    ones = np.ones(K.shape[0])
    m1 = M @ ones
    c = float(ones @ m1)

    def apply(b: NDArray) -> NDArray:
        x = lu.solve(np.asarray(b, dtype=float).reshape(-1))
        if deflate:
            x = x - ones * (m1 @ x) / c
        return x

    return LinearOperator(K.shape, matvec=apply, dtype=float)


def first_eigenvalue(mesh: SurfaceMesh, extrapolate: bool = True, n_eigs: int = N_EIGS, seed: int = 0) -> SpectralResult:
    """Smallest positive eigenvalue of the Laplace-Beltrami operator on the mesh.

    Pure Neumann: the constant mode is projected out of every shift-invert
    step. Dirichlet vertices are eliminated. With `extrapolate`, the result on
    the next coarser level gives (4 lambda_h - lambda_2h) / 3.
    """
    K, M = mesh.stiffness, mesh.mass
    n = K.shape[0]
    free = np.ones(n, dtype=bool)
    free[mesh.dirichlet_vertices] = False
    deflate = mesh.is_pure_neumann
    Kf = csc_matrix(K[free][:, free])
    Mf = csc_matrix(M[free][:, free])
    nf = Kf.shape[0]
    k = min(n_eigs, nf - 2)
    if k < 1:
        raise SpectralError(f"Mesh has only {nf} free vertices")

    v0 = make_rng(seed, "eigsh-start").normal(size=nf)
    if deflate:
        ones = np.ones(nf)
        v0 -= ones * float(ones @ (Mf @ v0)) / float(ones @ (Mf @ ones))
    try:
        vals, vecs = eigsh(Kf, k=k, M=Mf, sigma=SHIFT, which="LM", OPinv=_shift_invert(Kf, Mf, deflate), v0=v0)
    except (ArpackNoConvergence, ArpackError) as e:
        raise SpectralError(f"Eigen iteration stagnated: {e}") from e

    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    if deflate:
        keep = np.abs(vecs.T @ (Mf @ np.ones(nf))) <= 1e-6 * np.sqrt(float(np.ones(nf) @ (Mf @ np.ones(nf))))
        vals, vecs = vals[keep], vecs[:, keep]
    if not len(vals):
        raise SpectralError("No eigenpair orthogonal to constants")
    lam = float(vals[0])
    if lam <= 0:
        raise SpectralError(f"Non-positive first eigenvalue {lam:.3e}")

    vec = np.zeros(n)
    vec[free] = vecs[:, 0]
    vec /= math.sqrt(float(vec @ (M @ vec)))
    rayleigh = float(vec @ (K @ vec)) / float(vec @ (M @ vec))
    result = SpectralResult(lam, vec, mesh.h, vals, rayleigh)
    logger.debug("first_eigenvalue: %d vertices, lambda1 = %.6f, h = %.4g", n, lam, mesh.h)

    if extrapolate and mesh.seed is not None and mesh.level >= 1:
        coarse = first_eigenvalue(mesh.coarsen(), extrapolate=False, n_eigs=n_eigs, seed=seed)
        result.coarse_lambda1 = coarse.lambda1
        result.extrapolated = (4.0 * lam - coarse.lambda1) / 3.0
    return result


# ============================================================================
# Comparisons
# ============================================================================

def _reflection_map(mesh: SurfaceMesh, normal: NDArray[np.float64]) -> NDArray[np.int64]:
    """Vertex permutation induced by reflection in the plane through the center"""
    rel = mesh.vertices - mesh.center
    mirrored = rel - 2.0 * np.outer(rel @ normal, normal)
    dist, idx = cKDTree(rel).query(mirrored)
    if float(dist.max()) > 1e-9 * mesh.radius:
        raise GeometryError(f"Reflection is not a symmetry of the mesh (mismatch {float(dist.max()):.3e})")
    return idx


@dataclass
class MixedComparison:
    lambda_full: float
    mu_half_domain: float
    lambda_half_neumann: float
    mu_half_lune: float
    reflection_gap: float
    tol: float = 0.02

    @property
    def lune_ok(self) -> bool:
        return abs(self.mu_half_lune - 2.0) <= self.tol * 2.0

    @property
    def chain_ok(self) -> bool:
        return self.lambda_full >= self.mu_half_lune - self.tol * 2.0

    @property
    def monotone_ok(self) -> bool:
        return self.mu_half_domain >= self.lambda_half_neumann * (1 - 1e-9)

    @property
    def passed(self) -> bool:
        return self.lune_ok and self.chain_ok and self.monotone_ok and self.reflection_gap <= 1e-8


def _value(res: SpectralResult) -> float:
    return res.extrapolated if res.extrapolated is not None else res.lambda1


def mixed_comparison(
    cone: MinimalCone,
    component: int = 0,
    symmetry_axis: int = 0,
    target_h: float = 0.05,
    tol: float = 0.02,
) -> MixedComparison:
    """Eigenvalues of a T triangle, its mixed half along a symmetry axis, and
    the mixed half-lune of angle 2 pi / 3, with the reflection check."""
    if cone.cone_type != ConeType.T:
        raise ValueError("mixed_comparison needs a T cone")
    if not 0 <= symmetry_axis < 3:
        raise ValueError(f"symmetry_axis must be 0, 1 or 2, got {symmetry_axis}")
    full = mesh_domain(cone, 1.0, component, target_h)
    corners = [j for j in range(4) if j != component]
    A = [cone.rotation @ TETRA_VERTICES[j] for j in corners]
    s = symmetry_axis
    normal = np.cross(A[s], A[(s + 1) % 3] + A[(s + 2) % 3])
    normal /= np.linalg.norm(normal)
    perm = _reflection_map(full, normal)

    full_res = first_eigenvalue(full)
    f = full_res.eigenvector
    K, M = full.stiffness, full.mass
    q = float(f @ (K @ f)) / float(f @ (M @ f))
    g = f[perm]
    q_ref = float(g @ (K @ g)) / float(g @ (M @ g))

    half = mesh_half_domain(cone, component, symmetry_axis, 1.0, target_h)
    half_neumann = SurfaceMesh(
        half.vertices, half.triangles, half.boundary_edges, half.edge_arcs, half.radius,
        half.center, frozenset(), half.seed, half.level,
    )
    y_cone = MinimalCone(ConeType.Y, cone.center, cone.rotation)
    lune = mesh_half_domain(y_cone, 0, 0, 1.0, target_h)

    report = MixedComparison(
        lambda_full=_value(full_res),
        mu_half_domain=first_eigenvalue(half, extrapolate=False).lambda1,
        lambda_half_neumann=first_eigenvalue(half_neumann, extrapolate=False).lambda1,
        mu_half_lune=_value(first_eigenvalue(lune)),
        reflection_gap=abs(q_ref - q) / q,
        tol=tol,
    )
    logger.info(
        "mixed_comparison: lambda(T)=%.4f, mu(half T)=%.4f, mu(half lune)=%.4f",
        report.lambda_full, report.mu_half_domain, report.mu_half_lune,
    )
    return report


def band_limited_field(rng: np.random.Generator, degree: int = 4) -> Callable[[NDArray], NDArray]:
    """Random polynomial of degree <= degree in the unit-sphere coordinates"""
    terms = [(a, b, c) for a in range(degree + 1) for b in range(degree + 1) for c in range(degree + 1)
             if 0 < a + b + c <= degree]
    coeffs = rng.normal(size=len(terms))
    powers = np.array(terms, dtype=int)

    def f(pts: NDArray) -> NDArray:
        p = np.atleast_2d(pts)
        return np.prod(p[:, None, :] ** powers[None, :, :], axis=2) @ coeffs

    return f


@dataclass
class PoincareReport:
    ratios: list[float] = field(default_factory=list)
    skipped: int = 0
    bound: float = 0.5

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0

    def passed(self, tol: float = 0.03) -> bool:
        return self.max_ratio <= self.bound * (1 + tol)


def poincare_check(
    mesh: SurfaceMesh,
    fields: Sequence[Union[Callable[[NDArray], NDArray], NDArray]],
    r: Optional[float] = None,
) -> PoincareReport:
    """Ratios of the mean-free mass norm to r^2 times the stiffness energy.

    Callables receive unit-sphere coordinates relative to the mesh center.
    """
    if not mesh.is_pure_neumann:
        raise ValueError("poincare_check needs a pure Neumann mesh")
    r = mesh.radius if r is None else r
    K, M = mesh.stiffness, mesh.mass
    unit = (mesh.vertices - mesh.center) / mesh.radius
    ones = np.ones(len(unit))
    total = float(ones @ (M @ ones))
    report = PoincareReport()
    for fn in fields:
        f = np.asarray(fn(unit) if callable(fn) else fn, dtype=float)
        g = f - float(ones @ (M @ f)) / total
        energy = float(f @ (K @ f))
        norm = float(g @ (M @ g))
        if energy <= 1e-14 * max(float(f @ (M @ f)), 1e-300):
            report.skipped += 1
            continue
        report.ratios.append(norm / (r * r * energy))
    return report
