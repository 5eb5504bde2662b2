"""
Minimal Cone Geometry

Posed planes, Y cones and T cones: exact distance fields, spines, analytic
complement regions, flood-fill region labeling, recentering, and the
separation and orientation checks against a sampled crack.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import TYPE_CHECKING, Callable, Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import ndimage

from .errors import (
    GeometryError,
    OrientationError,
    RecenterError,
    ResolutionError,
    SeparationError,
)

if TYPE_CHECKING:
    from .crack import CrackSet

logger = logging.getLogger(__name__)

# ============================================================================
# Reference Cones
# ============================================================================

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
SQRT6 = math.sqrt(6.0)

#: Vertices A_1..A_4 of the regular tetrahedron spanning T_0.
TETRA_VERTICES = np.array(
    [
        [1.0, 0.0, 0.0],
        [-1.0 / 3.0, 2.0 * SQRT2 / 3.0, 0.0],
        [-1.0 / 3.0, -SQRT2 / 3.0, SQRT6 / 3.0],
        [-1.0 / 3.0, -SQRT2 / 3.0, -SQRT6 / 3.0],
    ]
)

#: Outward directions of the three sheets of Y_0 (spine is the x3 axis).
Y_SHEETS = np.array(
    [
        [1.0, 0.0, 0.0],
        [-0.5, SQRT3 / 2.0, 0.0],
        [-0.5, -SQRT3 / 2.0, 0.0],
    ]
)

TETRA_EDGES = [(i, j) for i in range(4) for j in range(i + 1, 4)]

ORTHONORMAL_TOL = 1e-12


class ConeType(IntEnum):
    """Minimal cone families, valued by their type number"""
    P = 1
    Y = 2
    T = 3

    @classmethod
    def parse(cls, value: Union[str, int, "ConeType"]) -> "ConeType":
        if isinstance(value, ConeType):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError as e:
                raise GeometryError(f"Unknown cone type: {value!r}") from e
        try:
            return cls(int(value))
        except ValueError as e:
            raise GeometryError(f"Unknown cone type: {value!r}") from e


# ============================================================================
# Primitive Sets
# ============================================================================

def _as_points(p: ArrayLike) -> tuple[NDArray[np.float64], bool]:
    """Coerce to an (N, 3) array; 2D points are embedded with x3 = 0."""
    arr = np.asarray(p, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[-1] == 2:
        arr = np.hstack([arr, np.zeros((arr.shape[0], 1))])
    elif arr.shape[-1] != 3:
        raise ValueError(f"Points must have 2 or 3 coordinates, got shape {arr.shape}")
    return arr, single


def _unit(v: NDArray[np.float64]) -> NDArray[np.float64]:
    return v / np.linalg.norm(v)


def ray_distance(origin: NDArray, direction: NDArray, pts: NDArray) -> NDArray:
    q = pts - origin
    s = np.maximum(q @ direction, 0.0)
    return np.linalg.norm(q - s[:, None] * direction, axis=1)


def line_distance(origin: NDArray, direction: NDArray, pts: NDArray) -> NDArray:
    q = pts - origin
    s = q @ direction
    return np.linalg.norm(q - s[:, None] * direction, axis=1)


def wedge_distance(apex: NDArray, u: NDArray, v: NDArray, pts: NDArray) -> NDArray:
    """Distance to the closed planar cone {a*u + b*v : a, b >= 0}, angle(u, v) < pi."""
    n = _unit(np.cross(u, v))
    q = pts - apex
    h = q @ n
    qp = q - h[:, None] * n
    g = float(u @ v)
    qu = qp @ u
    qv = qp @ v
    den = 1.0 - g * g
    alpha = (qu - g * qv) / den
    beta = (qv - g * qu) / den
    inside = (alpha >= 0.0) & (beta >= 0.0)
    edge = np.minimum(ray_distance(apex, u, pts), ray_distance(apex, v, pts))
    return np.where(inside, np.abs(h), edge)


@dataclass(frozen=True, eq=False)
class Sector:
    """One flat piece of a cone.

    plane:     apex + span(u, v)
    halfplane: apex + {s*u + t*v : s >= 0}, boundary line along v
    wedge:     apex + {a*u + b*v : a, b >= 0}
    """
    kind: str
    apex: NDArray[np.float64]
    u: NDArray[np.float64]
    v: NDArray[np.float64]

    @property
    def normal(self) -> NDArray[np.float64]:
        return _unit(np.cross(self.u, self.v))

    def distance(self, pts: NDArray[np.float64]) -> NDArray[np.float64]:
        if self.kind == "plane":
            return np.abs((pts - self.apex) @ self.normal)
        if self.kind == "halfplane":
            q = pts - self.apex
            t = q @ self.v
            qp = q - t[:, None] * self.v
            s = np.maximum(qp @ self.u, 0.0)
            return np.linalg.norm(qp - s[:, None] * self.u, axis=1)
        return wedge_distance(self.apex, self.u, self.v, pts)

    def closest(self, pts: NDArray[np.float64]) -> NDArray[np.float64]:
        q = pts - self.apex
        if self.kind == "plane":
            return pts - (q @ self.normal)[:, None] * self.normal
        if self.kind == "halfplane":
            t = q @ self.v
            s = np.maximum((q - t[:, None] * self.v) @ self.u, 0.0)
            return self.apex + s[:, None] * self.u + t[:, None] * self.v
        n = self.normal
        proj = pts - (q @ n)[:, None] * n
        g = float(self.u @ self.v)
        qu = (proj - self.apex) @ self.u
        qv = (proj - self.apex) @ self.v
        inside = ((qu - g * qv) >= 0.0) & ((qv - g * qu) >= 0.0)
        su = np.maximum(q @ self.u, 0.0)[:, None] * self.u
        sv = np.maximum(q @ self.v, 0.0)[:, None] * self.v
        on_u = np.linalg.norm(q - su, axis=1) <= np.linalg.norm(q - sv, axis=1)
        edge = self.apex + np.where(on_u[:, None], su, sv)
        return np.where(inside[:, None], proj, edge)


@dataclass(frozen=True, eq=False)
class SpineComponent:
    """A singular line (Y) or half-line (T) of a cone"""
    origin: NDArray[np.float64]
    direction: NDArray[np.float64]
    kind: str

    def distance(self, pts: NDArray[np.float64]) -> NDArray[np.float64]:
        if self.kind == "line":
            return line_distance(self.origin, self.direction, pts)
        return ray_distance(self.origin, self.direction, pts)

    def foot(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        s = float((x - self.origin) @ self.direction)
        if self.kind == "ray":
            s = max(s, 0.0)
        return self.origin + s * self.direction


# ============================================================================
# Domain Types
# ============================================================================

@dataclass(frozen=True)
class Ball:
    """Closed ball B(center, radius) in R^2 or R^3"""
    center: NDArray[np.float64]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError(f"Ball radius must be positive, got {self.radius}")
        if self.center.shape[0] not in (2, 3):
            raise ValueError(f"Ball center must be 2D or 3D, got {self.center.shape}")

    @property
    def dimension(self) -> int:
        return int(self.center.shape[0])

    def contains(self, pts: ArrayLike, slack: float = 0.0) -> NDArray[np.bool_]:
        arr = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.linalg.norm(arr - self.center, axis=1) <= self.radius + slack

    def scaled(self, factor: float) -> "Ball":
        return Ball(self.center, self.radius * factor)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ball):
            return NotImplemented
        return self.radius == other.radius and np.array_equal(self.center, other.center)

    def __hash__(self) -> int:
        return hash((self.radius, tuple(self.center)))


@dataclass(frozen=True, eq=False)
class MinimalCone:
    """A posed plane, Y cone or T cone"""
    cone_type: ConeType
    center: NDArray[np.float64]
    rotation: NDArray[np.float64]

    @cached_property
    def sectors(self) -> list[Sector]:
        c, R = self.center, self.rotation
        if self.cone_type == ConeType.P:
            return [Sector("plane", c, R[:, 0].copy(), R[:, 2].copy())]
        if self.cone_type == ConeType.Y:
            axis = R[:, 2].copy()
            return [Sector("halfplane", c, R @ d, axis) for d in Y_SHEETS]
        verts = TETRA_VERTICES @ R.T
        return [Sector("wedge", c, verts[i], verts[j]) for i, j in TETRA_EDGES]

    @cached_property
    def spine(self) -> list[SpineComponent]:
        if self.cone_type == ConeType.P:
            return []
        if self.cone_type == ConeType.Y:
            return [SpineComponent(self.center, self.rotation[:, 2].copy(), "line")]
        verts = TETRA_VERTICES @ self.rotation.T
        return [SpineComponent(self.center, a, "ray") for a in verts]

    def sector_distances(self, p: ArrayLike) -> NDArray[np.float64]:
        pts, _ = _as_points(p)
        return np.stack([s.distance(pts) for s in self.sectors], axis=1)

    def distance(self, p: ArrayLike) -> Union[float, NDArray[np.float64]]:
        pts, single = _as_points(p)
        d = self.sector_distances(pts).min(axis=1)
        return float(d[0]) if single else d

    def spine_distance(self, p: ArrayLike) -> Union[float, NDArray[np.float64]]:
        pts, single = _as_points(p)
        if not self.spine:
            d = np.full(pts.shape[0], np.inf)
        else:
            d = np.min([s.distance(pts) for s in self.spine], axis=0)
        return float(d[0]) if single else d

    def center_distance(self, x: ArrayLike) -> float:
        """Distance from x to the cone's center set (plane, spine line, or vertex)"""
        pts, _ = _as_points(x)
        if self.cone_type == ConeType.P:
            return float(self.sectors[0].distance(pts)[0])
        if self.cone_type == ConeType.Y:
            return float(self.spine[0].distance(pts)[0])
        return float(np.linalg.norm(pts[0] - self.center))

    def to_dict(self) -> dict:
        return {
            "type": self.cone_type.name,
            "center": [float(v) for v in self.center],
            "rotation": [float(v) for v in self.rotation.reshape(-1)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MinimalCone":
        return make_cone(data["type"], data.get("center"), np.asarray(data["rotation"]).reshape(3, 3))


@dataclass
class RegionLabeling:
    """Flood-fill components of ball minus the slab Z_gap"""
    cone: MinimalCone
    ball: Ball
    gap: float
    resolution: int
    labels: NDArray[np.int64]
    count: int
    regions: dict[int, int] = field(default_factory=dict)

    @property
    def step(self) -> float:
        return 2.0 * self.ball.radius / self.resolution

    def label_of(self, pts: ArrayLike) -> NDArray[np.int64]:
        """Component index in [1, count] of each point, 0 when excluded"""
        arr = np.atleast_2d(np.asarray(pts, dtype=float))
        lo = self.ball.center - self.ball.radius
        idx = np.floor((arr - lo) / self.step).astype(int)
        ok = np.all((idx >= 0) & (idx < self.resolution), axis=1)
        out = np.zeros(arr.shape[0], dtype=np.int64)
        out[ok] = self.labels[tuple(idx[ok].T)]
        return out


# ============================================================================
# Construction and Distance
# ============================================================================

def make_cone(
    cone_type: Union[str, int, ConeType],
    center: Optional[ArrayLike] = None,
    rotation: Optional[ArrayLike] = None,
) -> MinimalCone:
    """Pose a reference cone: x -> center + rotation @ x"""
    ctype = ConeType.parse(cone_type)
    c = np.zeros(3) if center is None else np.asarray(center, dtype=float).reshape(-1)
    if c.shape[0] == 2:
        c = np.append(c, 0.0)
    if c.shape != (3,):
        raise GeometryError(f"Cone center must be a 3-vector, got shape {c.shape}")
    R = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
    if R.shape != (3, 3):
        raise GeometryError(f"Rotation must be 3x3, got shape {R.shape}")
    err = float(np.max(np.abs(R.T @ R - np.eye(3))))
    if err > ORTHONORMAL_TOL:
        raise GeometryError(f"Rotation is not orthonormal (max |R^T R - I| = {err:.3e})")
    return MinimalCone(ctype, c, R.copy())


def cone_distance(cone: MinimalCone, p: ArrayLike) -> Union[float, NDArray[np.float64]]:
    """Exact Euclidean distance from p to the cone"""
    return cone.distance(p)


def closest_point(cone: MinimalCone, p: ArrayLike) -> NDArray[np.float64]:
    """Nearest point of the cone to each of the given points, shape (N, 3)"""
    pts, _ = _as_points(p)
    d = cone.sector_distances(pts)
    best = np.argmin(d, axis=1)
    out = np.empty_like(pts)
    for k, sector in enumerate(cone.sectors):
        sel = best == k
        if np.any(sel):
            out[sel] = sector.closest(pts[sel])
    return out


def cone_region(cone: MinimalCone, p: ArrayLike) -> NDArray[np.int64]:
    """Index of the analytic component of R^3 minus the cone containing each point.

    P: 0 on the side x2 >= 0, 1 below. Y: the 120 degree sector counted from
    the first sheet. T: the index i of the vertex A_i opposite the cell.
    """
    pts, _ = _as_points(p)
    local = (pts - cone.center) @ cone.rotation
    if cone.cone_type == ConeType.P:
        return (local[:, 1] < 0.0).astype(np.int64)
    if cone.cone_type == ConeType.Y:
        angle = np.mod(np.arctan2(local[:, 1], local[:, 0]), 2.0 * np.pi)
        return np.minimum((angle / (2.0 * np.pi / 3.0)).astype(np.int64), 2)
    return np.argmin(local @ TETRA_VERTICES.T, axis=1).astype(np.int64)


def is_almost_centered(cone: MinimalCone, ball: Ball, V: float = 2.0) -> bool:
    """True when the cone's center set meets B(ball.center, ball.radius / V)"""
    return cone.center_distance(ball.center) < ball.radius / V


def cone_to_json(cone: MinimalCone) -> str:
    return json.dumps(cone.to_dict())


def cone_from_json(text: str) -> MinimalCone:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise GeometryError(f"Invalid cone JSON: {e}") from e
    return MinimalCone.from_dict(data)


def frame_with_normal(normal: ArrayLike) -> NDArray[np.float64]:
    """Rotation whose second column is the given unit normal"""
    n = _unit(np.asarray(normal, dtype=float))
    trial = np.eye(3)[int(np.argmin(np.abs(n)))]
    e1 = _unit(trial - (trial @ n) * n)
    e3 = np.cross(e1, n)
    return np.column_stack([e1, n, e3])


# ============================================================================
# Sampling and Triangulation
# ============================================================================

def _sector_patch(sector: Sector, ball: Ball, h: float) -> Optional[NDArray[np.float64]]:
    """Triangle soup covering sector ∩ ball, or None when they are disjoint"""
    c, r = ball.center if ball.dimension == 3 else np.append(ball.center, 0.0), ball.radius
    if float(sector.distance(c[None, :])[0]) > r:
        return None

    if sector.kind == "wedge":
        theta = math.acos(float(np.clip(sector.u @ sector.v, -1.0, 1.0)))
        rho = float(np.linalg.norm(c - sector.apex))
        s_lo, s_hi = max(0.0, rho - r), rho + r
        n_s = max(1, math.ceil((s_hi - s_lo) / h))
        n_phi = max(2, math.ceil(theta * s_hi / h))
        w = _unit(sector.v - (sector.v @ sector.u) * sector.u)
        s = np.linspace(s_lo, s_hi, n_s + 1)
        phi = np.linspace(0.0, theta, n_phi + 1)
        dirs = np.cos(phi)[:, None] * sector.u + np.sin(phi)[:, None] * w
        grid = sector.apex + s[:, None, None] * dirs[None, :, :]
    else:
        if sector.kind == "plane":
            foot = c - ((c - sector.apex) @ sector.normal) * sector.normal
            s = np.linspace(-r, r, max(1, math.ceil(2 * r / h)) + 1)
        else:
            t0 = float((c - sector.apex) @ sector.v)
            foot = sector.apex + t0 * sector.v
            s_hi = float((c - sector.apex) @ sector.u) + r
            if s_hi <= 0.0:
                return None
            s = np.linspace(0.0, s_hi, max(1, math.ceil(s_hi / h)) + 1)
        t = np.linspace(-r, r, max(1, math.ceil(2 * r / h)) + 1)
        grid = foot + s[:, None, None] * sector.u + t[None, :, None] * sector.v

    p00 = grid[:-1, :-1].reshape(-1, 3)
    p10 = grid[1:, :-1].reshape(-1, 3)
    p01 = grid[:-1, 1:].reshape(-1, 3)
    p11 = grid[1:, 1:].reshape(-1, 3)
    tris = np.concatenate(
        [np.stack([p00, p10, p11], axis=1), np.stack([p00, p11, p01], axis=1)]
    )
    area = 0.5 * np.linalg.norm(np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1)
    centroid = tris.mean(axis=1)
    spread = np.max(np.linalg.norm(tris - centroid[:, None, :], axis=2), axis=1)
    keep = (area > 1e-12 * h * h) & (np.linalg.norm(centroid - c, axis=1) <= r + spread)
    return tris[keep]


def cone_triangles(cone: MinimalCone, ball: Ball, h: float) -> NDArray[np.float64]:
    """Triangles of edge length about h covering cone ∩ ball"""
    patches = [_sector_patch(s, ball, h) for s in cone.sectors]
    patches = [p for p in patches if p is not None and len(p)]
    if not patches:
        return np.zeros((0, 3, 3))
    return np.concatenate(patches)


def sample_cone(
    cone: MinimalCone, ball: Ball, n: int, rng: np.random.Generator
) -> NDArray[np.float64]:
    """Uniform-in-parameter random points of cone ∩ ball (up to n per sector)"""
    c, r = ball.center, ball.radius
    out = []
    for sector in cone.sectors:
        if sector.kind == "plane":
            foot = c - ((c - sector.apex) @ sector.normal) * sector.normal
            st = rng.uniform(-r, r, size=(n, 2))
            pts = foot + st[:, :1] * sector.u + st[:, 1:] * sector.v
        elif sector.kind == "halfplane":
            t0 = float((c - sector.apex) @ sector.v)
            s_hi = max(float((c - sector.apex) @ sector.u) + r, 0.0)
            s = rng.uniform(0.0, s_hi, size=(n, 1))
            t = rng.uniform(t0 - r, t0 + r, size=(n, 1))
            pts = sector.apex + s * sector.u + t * sector.v
        else:
            reach = float(np.linalg.norm(c - sector.apex)) + r
            ab = rng.uniform(0.0, 2.0 * reach, size=(n, 2))
            pts = sector.apex + ab[:, :1] * sector.u + ab[:, 1:] * sector.v
        out.append(pts[ball.contains(pts)])
    return np.concatenate(out) if out else np.zeros((0, 3))


# ============================================================================
# Region Labeling
# ============================================================================

def _grid_axes(ball: Ball, resolution: int) -> tuple[float, list[NDArray[np.float64]]]:
    step = 2.0 * ball.radius / resolution
    axes = [ball.center[d] - ball.radius + step * (np.arange(resolution) + 0.5)
            for d in range(ball.dimension)]
    return step, axes


def label_regions(
    cone: MinimalCone,
    ball: Ball,
    gap: float,
    resolution: int,
    min_fraction: float = 1e-3,
) -> RegionLabeling:
    """Face-adjacent flood fill of the grid cells of ball \\ Z_gap"""
    if not 0 < gap < ball.radius / 10.0:
        raise ValueError(f"gap must lie in (0, r/10), got {gap} for r = {ball.radius}")
    step, axes = _grid_axes(ball, resolution)
    if step >= gap / 2.0:
        raise ResolutionError(
            f"Grid step {step:.4g} does not resolve the slab: need step < gap/2 = {gap / 2:.4g}"
        )

    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    inside = np.linalg.norm(pts - ball.center, axis=1) < ball.radius
    clear = np.zeros(pts.shape[0], dtype=bool)
    clear[inside] = cone.distance(pts[inside]) > gap
    shape = (resolution,) * ball.dimension
    structure = ndimage.generate_binary_structure(ball.dimension, 1)
    raw, n_raw = ndimage.label(clear.reshape(shape), structure=structure)

    sizes = np.bincount(raw.reshape(-1), minlength=n_raw + 1)
    floor = min_fraction * int(inside.sum())
    remap = np.zeros(n_raw + 1, dtype=np.int64)
    count = 0
    for lab in range(1, n_raw + 1):
        if sizes[lab] >= floor:
            count += 1
            remap[lab] = count
    labels = remap[raw]

    analytic = cone_region(cone, pts).reshape(shape)
    regions = {}
    for lab in range(1, count + 1):
        votes = np.bincount(analytic[labels == lab])
        regions[lab] = int(np.argmax(votes))
    if count < n_raw:
        logger.debug("label_regions dropped %d sliver components", n_raw - count)
    return RegionLabeling(cone, ball, gap, resolution, labels, count, regions)


# ============================================================================
# Recentering
# ============================================================================

def _containing_sector(cone: MinimalCone, x: NDArray[np.float64]) -> int:
    return int(np.argmin(cone.sector_distances(x[None, :])[0]))


def _plane_candidate(cone: MinimalCone, x: NDArray[np.float64]) -> tuple[MinimalCone, Callable[[float], bool]]:
    k = _containing_sector(cone, x)
    sector = cone.sectors[k]
    plane = make_cone(ConeType.P, x, frame_with_normal(sector.normal))
    if cone.cone_type == ConeType.P:
        return plane, lambda r1: True

    others = [s for i, s in enumerate(cone.sectors) if i != k]

    def agrees(r1: float) -> bool:
        pt = x[None, :]
        if float(cone.spine_distance(pt)[0]) < r1:
            return False
        return all(float(s.distance(pt)[0]) >= r1 for s in others)

    return plane, agrees


def _y_candidates(cone: MinimalCone, x: NDArray[np.float64]) -> list[tuple[MinimalCone, Callable[[float], bool]]]:
    if cone.cone_type == ConeType.Y:
        foot = cone.spine[0].foot(x)
        return [(MinimalCone(ConeType.Y, foot, cone.rotation), lambda r1: True)]
    if cone.cone_type != ConeType.T:
        return []

    verts = TETRA_VERTICES @ cone.rotation.T
    order = np.argsort([float(s.distance(x[None, :])[0]) for s in cone.spine], kind="stable")
    pt = x[None, :]
    out = []
    for j in order:
        a = verts[j]
        rest = [k for k in range(4) if k != j]
        w1 = _unit(verts[rest[0]] - (verts[rest[0]] @ a) * a)
        R = np.column_stack([w1, np.cross(a, w1), a])
        foot = cone.center + float((x - cone.center) @ a) * a
        y_cone = MinimalCone(ConeType.Y, foot, R)
        far_wedges = [
            Sector("wedge", cone.center, verts[k], verts[l])
            for k, l in TETRA_EDGES if j not in (k, l)
        ]
        extensions = [Sector("wedge", cone.center, verts[k], -a) for k in rest]

        def agrees(r1: float, far=far_wedges, ext=extensions) -> bool:
            return all(float(s.distance(pt)[0]) >= r1 for s in far + ext)

        out.append((y_cone, agrees))
    return out


def recenter(
    cone: MinimalCone,
    origin: ArrayLike,
    r0: float,
    V: float = 2.0,
) -> tuple[float, MinimalCone]:
    """Find r1 in {r0, V r0, V^2 r0} and a cone equal to `cone` in B(origin, r1)
    whose center lies in B(origin, r1 / V).

    Candidates are tried from the smallest radius up, and at each radius in
    the order plane, Y, original type.
    """
    if V < 1.0:
        raise ValueError(f"V must be >= 1, got {V}")
    x = np.asarray(origin, dtype=float).reshape(-1)
    if x.shape[0] == 2:
        x = np.append(x, 0.0)
    d = float(cone.distance(x))
    if d > 1e-9 * r0:
        raise GeometryError(f"Origin is not on the cone (distance {d:.3e} > {1e-9 * r0:.3e})")

    candidates = [_plane_candidate(cone, x)]
    candidates += _y_candidates(cone, x)
    if cone.cone_type == ConeType.T:
        candidates.append((cone, lambda r1: True))

    for r1 in (r0, V * r0, V * V * r0):
        for cand, agrees in candidates:
            if cand.center_distance(x) < r1 / V and agrees(r1):
                return r1, cand
    raise RecenterError(
        f"No admissible recentering of the {cone.cone_type.name} cone at radius up to {V * V * r0:.4g}"
    )


def local_agreement(
    a: MinimalCone,
    b: MinimalCone,
    ball: Ball,
    n: int = 2000,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Largest cross distance between sampled points of a ∩ ball and b ∩ ball"""
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for src, dst in ((a, b), (b, a)):
        pts = sample_cone(src, ball, n, rng)
        if len(pts):
            worst = max(worst, float(np.max(dst.distance(pts))))
    return worst


# ============================================================================
# Separation and Orientation
# ============================================================================

def _check_containment(crack: "CrackSet", cone: MinimalCone, ball: Ball, width: float) -> None:
    pts = crack.samples_in_ball(ball)
    if len(pts) == 0:
        return
    dev = float(np.max(cone.distance(pts)))
    if dev > width * (1.0 + 1e-9) + 1e-12:
        raise SeparationError(
            f"Crack leaves the slab of half-width {width:.4g} around the cone in the ball "
            f"(max deviation {dev:.4g})"
        )


def is_separating(
    crack: "CrackSet",
    cone: MinimalCone,
    ball: Ball,
    eps0: float,
    resolution: int = 48,
) -> bool:
    """True when the cells of ball \\ Z_{r eps0} lying in different cone regions
    never share a component of ball \\ crack on the grid."""
    from .crack import build_grid_graph

    if resolution < 16:
        raise ResolutionError(f"Resolution {resolution} cannot resolve the ball (need >= 16)")
    width = eps0 * ball.radius
    _check_containment(crack, cone, ball, width)

    graph = build_grid_graph(crack, ball, resolution)
    clear = cone.distance(graph.positions) > width
    region = cone_region(cone, graph.positions)
    pairs = np.unique(np.stack([graph.components[clear], region[clear]], axis=1), axis=0)
    per_component = np.bincount(pairs[:, 0], minlength=graph.n_components)
    separating = bool(np.all(per_component <= 1))
    logger.debug(
        "is_separating: %d components, %d regions, separating=%s",
        graph.n_components, len(np.unique(region[clear])), separating,
    )
    return separating


def _orient_step(
    crack: "CrackSet",
    inner: tuple[Ball, MinimalCone],
    outer: tuple[Ball, MinimalCone],
    eps0: float,
    resolution: int,
) -> dict[int, int]:
    from .crack import build_grid_graph

    (b_in, z_in), (b_out, z_out) = inner, outer
    _check_containment(crack, z_in, b_in, eps0 * b_in.radius)
    _check_containment(crack, z_out, b_out, eps0 * b_out.radius)

    graph = build_grid_graph(crack, b_out, resolution)
    pos = graph.positions
    in_inner = b_in.contains(pos) & (z_in.distance(pos) > eps0 * b_in.radius)
    if not np.any(in_inner):
        raise ResolutionError("Inner ball holds no grid cell; raise the resolution")
    outer_clear = z_out.distance(pos) > eps0 * b_out.radius
    outer_region = cone_region(z_out, pos)
    inner_region = cone_region(z_in, pos)

    comp_to_outer: dict[int, set[int]] = {}
    for comp, reg in zip(graph.components[outer_clear], outer_region[outer_clear]):
        comp_to_outer.setdefault(int(comp), set()).add(int(reg))

    mapping: dict[int, int] = {}
    for k in np.unique(inner_region[in_inner]):
        comps = np.unique(graph.components[in_inner & (inner_region == k)])
        if len(comps) != 1:
            raise OrientationError(f"Inner region {k + 1} splits across {len(comps)} crack components")
        targets = comp_to_outer.get(int(comps[0]), set())
        if len(targets) != 1:
            raise OrientationError(
                f"Injectivity fails: inner region {k + 1} reaches {len(targets)} outer regions "
                "(non-separating crack)"
            )
        mapping[int(k) + 1] = next(iter(targets)) + 1

    if len(set(mapping.values())) != len(mapping):
        raise OrientationError(f"Injectivity fails: region map {mapping} is not one-to-one")
    return mapping


def orientation_map(
    crack: "CrackSet",
    inner: tuple[Ball, MinimalCone],
    outer: tuple[Ball, MinimalCone],
    eps0: float,
    resolution: int = 32,
    chain_cone: Optional[Callable[[Ball], MinimalCone]] = None,
) -> dict[int, int]:
    """Injective map from the inner ball's regions to the outer ball's regions.

    Without `chain_cone` the map is read off one grid over the outer ball.
    With it, the balls B(x, 2^p r) between inner and outer are visited in
    turn, each with the cone `chain_cone` returns for it, and the step maps
    are composed.
    """
    b_in, b_out = inner[0], outer[0]
    if np.linalg.norm(b_in.center - b_out.center) + b_in.radius > b_out.radius * (1 + 1e-12):
        raise ValueError("Inner ball must be contained in the outer ball")
    if b_in.radius > b_out.radius / 32.0:
        logger.warning(
            "Inner radius %.4g exceeds r0/32 = %.4g; orientation may not hold",
            b_in.radius, b_out.radius / 32.0,
        )

    if chain_cone is None:
        needed = math.ceil(8.0 * b_out.radius / b_in.radius)
        res = max(resolution, needed)
        if res > 256:
            raise ResolutionError(
                f"Radius ratio {b_out.radius / b_in.radius:.1f} needs a grid of {res}; supply chain_cone"
            )
        return _orient_step(crack, inner, outer, eps0, res)

    chain = [inner]
    radius = b_in.radius * 2.0
    while radius <= b_out.radius / 2.0:
        ball = Ball(b_in.center, radius)
        chain.append((ball, chain_cone(ball)))
        radius *= 2.0
    chain.append(outer)

    mapping = {k: k for k in range(1, int(inner[1].cone_type) + 2)}
    for small, big in zip(chain[:-1], chain[1:]):
        step = _orient_step(crack, small, big, eps0, resolution)
        mapping = {k: step[v] for k, v in mapping.items() if v in step}
    return mapping
