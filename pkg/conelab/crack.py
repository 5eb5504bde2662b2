"""
Crack Sets

Sampled 2-sets given as triangle soups (segments in 2D), their I/O, the
standard test cracks, and the crack-aware grid graph shared by the
separation checks and the energy solver.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .geometry_core import Ball, MinimalCone, cone_triangles, frame_with_normal

logger = logging.getLogger(__name__)

CUT_SLACK = 1e-12

# ============================================================================
# Exact Distances
# ============================================================================

def point_triangle_distance(p: NDArray, a: NDArray, b: NDArray, c: NDArray) -> NDArray:
    """Row-wise distance from points p to triangles (a, b, c); all (N, 3)."""
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = np.where(denom != 0, vb / denom, 0.0)
        w = np.where(denom != 0, vc / denom, 0.0)
        closest = a + ab * v[:, None] + ac * w[:, None]

        e_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        closest = np.where(e_bc[:, None], b + (c - b) * np.nan_to_num(t_bc)[:, None], closest)
        e_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        t_ac = d2 / (d2 - d6)
        closest = np.where(e_ac[:, None], a + ac * np.nan_to_num(t_ac)[:, None], closest)
        closest = np.where(((d6 >= 0) & (d5 <= d6))[:, None], c, closest)
        e_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        t_ab = d1 / (d1 - d3)
        closest = np.where(e_ab[:, None], a + ab * np.nan_to_num(t_ab)[:, None], closest)
        closest = np.where(((d3 >= 0) & (d4 <= d3))[:, None], b, closest)
        closest = np.where(((d1 <= 0) & (d2 <= 0))[:, None], a, closest)
    return np.linalg.norm(p - closest, axis=1)


def point_segment_distance(p: NDArray, a: NDArray, b: NDArray) -> NDArray:
    ab = b - a
    den = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.where(den > 0, den, 1.0), 0.0, 1.0)
    return np.linalg.norm(p - (a + ab * t[:, None]), axis=1)


# ============================================================================
# Crack Set
# ============================================================================

def _sample_simplices(simplices: NDArray, h: float) -> tuple[NDArray, NDArray]:
    """Barycentric lattice samples, spacing at most h, at least one per simplex"""
    m, k, dim = simplices.shape
    if m == 0:
        return np.zeros((0, dim)), np.zeros(0, dtype=np.int64)
    edges = [np.linalg.norm(simplices[:, i] - simplices[:, j], axis=1)
             for i in range(k) for j in range(i + 1, k)]
    longest = np.max(np.stack(edges, axis=1), axis=1)
    counts = np.maximum(1, np.ceil(longest / h).astype(int))

    points, owner = [], []
    for n in np.unique(counts):
        idx = np.nonzero(counts == n)[0]
        if k == 2:
            bary = np.stack([1 - np.arange(n + 1) / n, np.arange(n + 1) / n], axis=1)
        else:
            ij = [(i, j) for i in range(n + 1) for j in range(n + 1 - i)]
            bary = np.array([(1 - (i + j) / n, i / n, j / n) for i, j in ij])
        pts = np.einsum("bk,mkd->mbd", bary, simplices[idx])
        points.append(pts.reshape(-1, dim))
        owner.append(np.repeat(idx, len(bary)))
    return np.concatenate(points), np.concatenate(owner)


@dataclass(eq=False)
class CrackSet:
    """Finite union of triangles (segments in 2D) with point samples.

    `triangles` has shape (M, d, d): M simplices of d vertices in R^d.
    """
    triangles: NDArray[np.float64]
    samples: NDArray[np.float64]
    owner: NDArray[np.int64]
    h: float
    extent: Ball

    @classmethod
    def from_triangles(cls, triangles: ArrayLike, h: float, dimension: Optional[int] = None) -> "CrackSet":
        tris = np.asarray(triangles, dtype=float)
        if tris.size == 0:
            dim = dimension or 3
            tris = np.zeros((0, dim, dim))
        if tris.ndim != 3 or tris.shape[1] != tris.shape[2] or tris.shape[2] not in (2, 3):
            raise ValueError(f"Expected (M, 3, 3) triangles or (M, 2, 2) segments, got {tris.shape}")
        if h <= 0:
            raise ValueError(f"Sampling step must be positive, got {h}")
        dim = tris.shape[2]
        if len(tris):
            if dim == 3:
                size = np.linalg.norm(np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1)
            else:
                size = np.linalg.norm(tris[:, 1] - tris[:, 0], axis=1)
            tris = tris[size > 1e-14 * h * (h if dim == 3 else 1.0)]
        samples, owner = _sample_simplices(tris, h)
        if len(tris):
            flat = tris.reshape(-1, dim)
            lo, hi = flat.min(axis=0), flat.max(axis=0)
            extent = Ball((lo + hi) / 2, max(float(np.linalg.norm(hi - lo)) / 2, h))
        else:
            extent = Ball(np.zeros(dim), 1.0)
        return cls(tris, samples, owner, float(h), extent)

    @classmethod
    def empty(cls, dimension: int = 3, h: float = 0.05) -> "CrackSet":
        return cls.from_triangles(np.zeros((0, dimension, dimension)), h, dimension)

    @property
    def dimension(self) -> int:
        return int(self.triangles.shape[2])

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    @cached_property
    def index(self) -> cKDTree:
        return cKDTree(self.samples if len(self.samples) else np.zeros((0, self.dimension)))

    @cached_property
    def centroids(self) -> NDArray[np.float64]:
        return self.triangles.mean(axis=1)

    @cached_property
    def centroid_index(self) -> cKDTree:
        return cKDTree(self.centroids)

    @cached_property
    def max_spread(self) -> float:
        """Largest distance from a simplex centroid to its vertices"""
        if self.is_empty:
            return 0.0
        return float(np.max(np.linalg.norm(self.triangles - self.centroids[:, None, :], axis=2)))

    def samples_in_ball(self, ball: Ball) -> NDArray[np.float64]:
        if len(self.samples) == 0:
            return self.samples
        idx = self.index.query_ball_point(ball.center[: self.dimension], ball.radius)
        return self.samples[np.sort(np.asarray(idx, dtype=np.int64))]

    def simplices_near(self, ball: Ball) -> NDArray[np.int64]:
        if self.is_empty:
            return np.zeros(0, dtype=np.int64)
        idx = self.centroid_index.query_ball_point(ball.center[: self.dimension], ball.radius + self.max_spread)
        return np.sort(np.asarray(idx, dtype=np.int64))

    def restrict(self, ball: Ball) -> "CrackSet":
        """Simplices that may meet the ball, keeping the sampling step"""
        idx = self.simplices_near(ball)
        return CrackSet.from_triangles(self.triangles[idx], self.h, self.dimension)

    def union(self, other: "CrackSet") -> "CrackSet":
        return CrackSet.from_triangles(np.concatenate([self.triangles, other.triangles]), min(self.h, other.h))

    def distance(self, p: ArrayLike) -> NDArray[np.float64]:
        """Exact distance from each point to the union of simplices"""
        pts = np.atleast_2d(np.asarray(p, dtype=float))
        if self.is_empty:
            return np.full(len(pts), np.inf)
        upper, _ = self.index.query(pts)
        radii = upper + self.max_spread + 1e-12
        out = np.empty(len(pts))
        for i, cand in enumerate(self.centroid_index.query_ball_point(pts, radii)):
            cand = np.asarray(cand, dtype=np.int64)
            tri = self.triangles[cand]
            q = np.repeat(pts[i : i + 1], len(cand), axis=0)
            if self.dimension == 3:
                d = point_triangle_distance(q, tri[:, 0], tri[:, 1], tri[:, 2])
            else:
                d = point_segment_distance(q, tri[:, 0], tri[:, 1])
            out[i] = float(d.min()) if len(d) else upper[i]
        return out

    def segment_hits(self, starts: ArrayLike, ends: ArrayLike) -> NDArray[np.bool_]:
        """Whether each segment [start, end] meets the crack (3D triangles)"""
        a = np.atleast_2d(np.asarray(starts, dtype=float))
        b = np.atleast_2d(np.asarray(ends, dtype=float))
        hits = np.zeros(len(a), dtype=bool)
        if self.is_empty:
            return hits
        mid = (a + b) / 2
        reach = np.linalg.norm(b - a, axis=1) / 2 + self.max_spread + 1e-12
        for i, cand in enumerate(self.centroid_index.query_ball_point(mid, reach)):
            if not cand:
                continue
            tri = self.triangles[np.asarray(cand, dtype=np.int64)]
            if self.dimension == 3:
                hits[i] = bool(np.any(_segment_triangle(a[i], b[i], tri)))
            else:
                hits[i] = bool(np.any(_segment_segment(a[i], b[i], tri)))
        return hits


def _segment_triangle(p: NDArray, q: NDArray, tri: NDArray) -> NDArray[np.bool_]:
    d = q - p
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    s = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, s)
    ok = np.abs(det) > 1e-300
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    t0 = p - tri[:, 0]
    u = np.einsum("ij,ij->i", t0, s) * inv
    qv = np.cross(t0, e1)
    v = (qv @ d) * inv
    t = np.einsum("ij,ij->i", e2, qv) * inv
    return ok & (u >= -CUT_SLACK) & (v >= -CUT_SLACK) & (u + v <= 1 + CUT_SLACK) & (t >= 0) & (t <= 1)


def _segment_segment(p: NDArray, q: NDArray, seg: NDArray) -> NDArray[np.bool_]:
    r = q - p
    s = seg[:, 1] - seg[:, 0]
    den = r[0] * s[:, 1] - r[1] * s[:, 0]
    ok = np.abs(den) > 1e-300
    w = seg[:, 0] - p
    t = np.where(ok, (w[:, 0] * s[:, 1] - w[:, 1] * s[:, 0]) / np.where(ok, den, 1.0), -1.0)
    u = np.where(ok, (w[:, 0] * r[1] - w[:, 1] * r[0]) / np.where(ok, den, 1.0), -1.0)
    return ok & (t >= 0) & (t <= 1) & (u >= -CUT_SLACK) & (u <= 1 + CUT_SLACK)


# ============================================================================
# Triangle Soup I/O
# ============================================================================

def save_triangle_soup(crack: CrackSet, path: Union[str, Path]) -> None:
    """One simplex per line: nine floats (3D triangle) or four floats (2D segment)"""
    flat = crack.triangles.reshape(len(crack.triangles), -1)
    np.savetxt(Path(path), flat, fmt="%.17g")


def load_triangle_soup(path: Union[str, Path], h: float) -> CrackSet:
    data = np.loadtxt(Path(path), ndmin=2)
    if data.size == 0:
        return CrackSet.empty(3, h)
    if data.shape[1] == 9:
        return CrackSet.from_triangles(data.reshape(-1, 3, 3), h)
    if data.shape[1] == 4:
        return CrackSet.from_triangles(data.reshape(-1, 2, 2), h)
    raise ValueError(f"{path}: expected 9 (triangle) or 4 (segment) columns, got {data.shape[1]}")


# ============================================================================
# Crack Builders
# ============================================================================

def cone_crack(cone: MinimalCone, ball: Ball, h: float) -> CrackSet:
    """The cone restricted to (a neighborhood of) the ball"""
    return CrackSet.from_triangles(cone_triangles(cone, ball, h), h)


def punch_hole(crack: CrackSet, center: ArrayLike, radius: float) -> CrackSet:
    """Drop every simplex with a vertex within `radius` of `center`"""
    c = np.asarray(center, dtype=float)
    near = np.any(np.linalg.norm(crack.triangles - c, axis=2) < radius, axis=1)
    return CrackSet.from_triangles(crack.triangles[~near], crack.h, crack.dimension)


def graph_surface(f: Callable[[NDArray, NDArray], NDArray], ball: Ball, h: float) -> CrackSet:
    """Surface x2 = f(x1, x3) over the square covering the ball"""
    c, r = ball.center, ball.radius
    n = max(1, math.ceil(2 * r / h))
    s = np.linspace(c[0] - r, c[0] + r, n + 1)
    t = np.linspace(c[2] - r, c[2] + r, n + 1)
    S, T = np.meshgrid(s, t, indexing="ij")
    grid = np.stack([S, c[1] + f(S, T), T], axis=-1)
    p00, p10 = grid[:-1, :-1].reshape(-1, 3), grid[1:, :-1].reshape(-1, 3)
    p01, p11 = grid[:-1, 1:].reshape(-1, 3), grid[1:, 1:].reshape(-1, 3)
    tris = np.concatenate([np.stack([p00, p10, p11], 1), np.stack([p00, p11, p01], 1)])
    return CrackSet.from_triangles(tris, h)


def bump_profile(rho: NDArray, radius: float) -> NDArray:
    """C^1 bump: 1 at rho = 0, 0 for rho >= radius"""
    t = np.clip(rho / radius, 0.0, 1.0)
    return (1.0 - t * t) ** 2


def bumped_plane(ball: Ball, h: float, height: float, center: ArrayLike, width: float) -> CrackSet:
    """Plane {x2 = c2} with a bump of the given height over the disk (center, width)"""
    cx = np.asarray(center, dtype=float)
    return graph_surface(lambda s, t: height * bump_profile(np.hypot(s - cx[0], t - cx[2]), width), ball, h)


def add_spur(crack: CrackSet, base: ArrayLike, height: float, width: float, h: float) -> CrackSet:
    """Union with a rectangular fin rising along +x2 from `base`, spanning x3"""
    b = np.asarray(base, dtype=float)
    ns = max(1, math.ceil(height / h))
    nt = max(1, math.ceil(width / h))
    s = np.linspace(0.0, height, ns + 1)
    t = np.linspace(-width / 2, width / 2, nt + 1)
    S, T = np.meshgrid(s, t, indexing="ij")
    grid = b + S[..., None] * np.array([0.0, 1.0, 0.0]) + T[..., None] * np.array([0.0, 0.0, 1.0])
    p00, p10 = grid[:-1, :-1].reshape(-1, 3), grid[1:, :-1].reshape(-1, 3)
    p01, p11 = grid[:-1, 1:].reshape(-1, 3), grid[1:, 1:].reshape(-1, 3)
    fin = np.concatenate([np.stack([p00, p10, p11], 1), np.stack([p00, p11, p01], 1)])
    return CrackSet.from_triangles(np.concatenate([crack.triangles, fin]), min(crack.h, h))


def wrinkle_caps(
    cone: MinimalCone,
    centers: ArrayLike,
    radii: ArrayLike,
    amplitude: float,
    h_fine: float,
) -> NDArray[np.float64]:
    """Bump caps of the given amplitude on the cone sheet through each center.

    Each cap is a disk of the tangent plane, lifted along the sheet normal by
    amplitude * bump(rho / r_i); its rim lies on the sheet.
    """
    caps = []
    for x, r in zip(np.atleast_2d(np.asarray(centers, dtype=float)), np.atleast_1d(radii)):
        k = int(np.argmin(cone.sector_distances(x[None, :])[0]))
        frame = frame_with_normal(cone.sectors[k].normal)
        n_r = max(2, math.ceil(r / h_fine))
        n_phi = max(12, math.ceil(2 * math.pi * r / h_fine))
        rho = np.linspace(0.0, r, n_r + 1)
        phi = np.linspace(0.0, 2 * math.pi, n_phi + 1)
        R, P = np.meshgrid(rho, phi, indexing="ij")
        lift = amplitude * bump_profile(R, r)
        grid = (x + (R * np.cos(P))[..., None] * frame[:, 0]
                + (R * np.sin(P))[..., None] * frame[:, 2]
                + lift[..., None] * frame[:, 1])
        p00, p10 = grid[:-1, :-1].reshape(-1, 3), grid[1:, :-1].reshape(-1, 3)
        p01, p11 = grid[:-1, 1:].reshape(-1, 3), grid[1:, 1:].reshape(-1, 3)
        caps.append(np.concatenate([np.stack([p00, p10, p11], 1), np.stack([p00, p11, p01], 1)]))
    return np.concatenate(caps) if caps else np.zeros((0, 3, 3))


def wrinkled_cone(
    cone: MinimalCone,
    ball: Ball,
    h: float,
    centers: ArrayLike,
    radii: ArrayLike,
    amplitude: float,
) -> CrackSet:
    """Exact cone plus wrinkle caps confined to the given bad balls"""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    h_fine = min(h, float(radii.min()) / 4) if len(radii) else h
    tris = np.concatenate([cone_triangles(cone, ball, h), wrinkle_caps(cone, centers, radii, amplitude, h_fine)])
    return CrackSet.from_triangles(tris, h_fine)


def segments_crack(segments: ArrayLike, h: float) -> CrackSet:
    """2D crack from long segments, split into pieces no longer than h"""
    pieces = []
    for a, b in np.asarray(segments, dtype=float):
        n = max(1, math.ceil(np.linalg.norm(b - a) / h))
        t = np.linspace(0.0, 1.0, n + 1)[:, None]
        pts = a + t * (b - a)
        pieces.append(np.stack([pts[:-1], pts[1:]], axis=1))
    return CrackSet.from_triangles(np.concatenate(pieces), h)


def tube_crack(eps: float, h: float, half_length: float = 1.2) -> CrackSet:
    """Two horizontal segments y = +-eps crossing the unit disk"""
    L = half_length
    return segments_crack([[[-L, eps], [L, eps]], [[-L, -eps], [L, -eps]]], h)


# ============================================================================
# Crack-Aware Grid Graph
# ============================================================================

def cut_edges(simplices: NDArray, lo: NDArray, step: float, n: int, chunk: int = 20000) -> list[NDArray[np.bool_]]:
    """Grid edges crossed by the simplices.

    Nodes sit at lo + i*step along every axis, i in [0, n). Entry idx of the
    array for axis a flags the edge from node idx to node idx + e_a.
    """
    dim = simplices.shape[2] if simplices.ndim == 3 else len(lo)
    shape = (n,) * dim
    cuts = [np.zeros(shape, dtype=bool) for _ in range(dim)]
    if len(simplices) == 0:
        return cuts
    for start in range(0, len(simplices), chunk):
        block = simplices[start : start + chunk]
        for a in range(dim):
            if dim == 3:
                _mark_triangle_cuts(block, a, lo, step, n, cuts[a])
            else:
                _mark_segment_cuts(block, a, lo, step, n, cuts[a])
    return cuts


def _lattice_window(proj: NDArray, lo: NDArray, step: float, n: int):
    """Per-simplex lattice index ranges of the projected bounding boxes"""
    pmin, pmax = proj.min(axis=1), proj.max(axis=1)
    ilo = np.maximum(np.ceil((pmin - lo) / step - 1e-9).astype(int), 0)
    ihi = np.minimum(np.floor((pmax - lo) / step + 1e-9).astype(int), n - 1)
    span = np.maximum(ihi - ilo + 1, 0)
    return ilo, ihi, span.max(axis=0)


def _mark_triangle_cuts(tris: NDArray, a: int, lo: NDArray, step: float, n: int, out: NDArray) -> None:
    b, c = [ax for ax in range(3) if ax != a]
    P = tris[:, :, [b, c]]
    Z = tris[:, :, a]
    ilo, ihi, (kb, kc) = _lattice_window(P, lo[[b, c]], step, n)
    if kb <= 0 or kc <= 0:
        return
    qb = ilo[:, 0, None, None] + np.arange(kb)[None, :, None]
    qc = ilo[:, 1, None, None] + np.arange(kc)[None, None, :]
    valid = (qb <= ihi[:, 0, None, None]) & (qc <= ihi[:, 1, None, None])

    p0 = P[:, 0]
    v0 = P[:, 1] - p0
    v1 = P[:, 2] - p0
    den = v0[:, 0] * v1[:, 1] - v1[:, 0] * v0[:, 1]
    scale = np.linalg.norm(v0, axis=1) * np.linalg.norm(v1, axis=1)
    nondeg = np.abs(den) > 1e-14 * scale
    den = np.where(nondeg, den, 1.0)[:, None, None]

    wx = lo[b] + qb * step - p0[:, 0, None, None]
    wy = lo[c] + qc * step - p0[:, 1, None, None]
    l1 = (wx * v1[:, 1, None, None] - v1[:, 0, None, None] * wy) / den
    l2 = (v0[:, 0, None, None] * wy - wx * v0[:, 1, None, None]) / den
    l0 = 1.0 - l1 - l2
    inside = valid & nondeg[:, None, None] & (l0 >= -CUT_SLACK) & (l1 >= -CUT_SLACK) & (l2 >= -CUT_SLACK)
    z = l0 * Z[:, 0, None, None] + l1 * Z[:, 1, None, None] + l2 * Z[:, 2, None, None]
    k0 = np.floor((z - lo[a]) / step).astype(int)
    ok = inside & (k0 >= 0) & (k0 <= n - 2)

    idx = [None, None, None]
    idx[a] = k0[ok]
    idx[b] = np.broadcast_to(qb, ok.shape)[ok]
    idx[c] = np.broadcast_to(qc, ok.shape)[ok]
    out[tuple(idx)] = True


def _mark_segment_cuts(segs: NDArray, a: int, lo: NDArray, step: float, n: int, out: NDArray) -> None:
    b = 1 - a
    P = segs[:, :, [b]]
    Z = segs[:, :, a]
    ilo, ihi, (kb,) = _lattice_window(P, lo[[b]], step, n)
    if kb <= 0:
        return
    qb = ilo[:, 0, None] + np.arange(kb)[None, :]
    valid = qb <= ihi[:, 0, None]
    den = P[:, 1, 0] - P[:, 0, 0]
    nondeg = np.abs(den) > 1e-14 * np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1)
    den = np.where(nondeg, den, 1.0)[:, None]
    lam = (lo[b] + qb * step - P[:, 0, 0, None]) / den
    inside = valid & nondeg[:, None] & (lam >= -CUT_SLACK) & (lam <= 1 + CUT_SLACK)
    z = Z[:, 0, None] + lam * (Z[:, 1, None] - Z[:, 0, None])
    k0 = np.floor((z - lo[a]) / step).astype(int)
    ok = inside & (k0 >= 0) & (k0 <= n - 2)
    idx = [None, None]
    idx[a] = k0[ok]
    idx[b] = np.broadcast_to(qb, ok.shape)[ok]
    out[tuple(idx)] = True


@dataclass(eq=False)
class GridGraph:
    """Cells of a uniform grid inside a ball, joined across uncut faces"""
    ball: Ball
    resolution: int
    step: float
    cells: NDArray[np.int64]
    positions: NDArray[np.float64]
    edges: NDArray[np.int64]
    edge_axis: NDArray[np.int64]
    boundary: NDArray[np.bool_]
    components: NDArray[np.int64]
    n_components: int
    node_id: NDArray[np.int64]

    @property
    def dimension(self) -> int:
        return self.ball.dimension

    @property
    def n_nodes(self) -> int:
        return int(self.positions.shape[0])

    @property
    def cell_measure(self) -> float:
        return self.step ** self.dimension

    @cached_property
    def floating(self) -> NDArray[np.bool_]:
        """Nodes of components that never touch the boundary"""
        touched = np.zeros(self.n_components, dtype=bool)
        touched[self.components[self.boundary]] = True
        return ~touched[self.components]

    def locate(self, pts: ArrayLike) -> NDArray[np.int64]:
        """Node id of the cell holding each point, -1 outside the graph"""
        arr = np.atleast_2d(np.asarray(pts, dtype=float))
        lo = self.ball.center - self.ball.radius
        idx = np.floor((arr - lo) / self.step).astype(int)
        ok = np.all((idx >= 0) & (idx < self.resolution), axis=1)
        out = np.full(arr.shape[0], -1, dtype=np.int64)
        out[ok] = self.node_id[tuple(idx[ok].T)]
        return out


def build_grid_graph(
    crack: CrackSet,
    ball: Ball,
    resolution: int,
    graph_cls: type = GridGraph,
) -> GridGraph:
    """Face-adjacency graph of the grid cells with centers inside the ball,
    with every edge crossing a crack simplex removed."""
    dim = ball.dimension
    if not crack.is_empty and crack.dimension != dim:
        raise ValueError(f"Crack dimension {crack.dimension} does not match ball dimension {dim}")
    n = int(resolution)
    step = 2.0 * ball.radius / n
    lo = ball.center - ball.radius + 0.5 * step
    axes = [lo[d] + step * np.arange(n) for d in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    full = np.stack(mesh, axis=-1)
    inside = np.linalg.norm(full - ball.center, axis=-1) < ball.radius

    node_id = np.full(inside.shape, -1, dtype=np.int64)
    node_id[inside] = np.arange(int(inside.sum()))
    cells = np.argwhere(inside)
    positions = full[inside]

    near = crack.triangles[crack.simplices_near(ball)] if not crack.is_empty else crack.triangles
    cuts = cut_edges(near, lo, step, n)

    edges, axis_of = [], []
    boundary = np.zeros(inside.shape, dtype=bool)
    for a in range(dim):
        lo_sl = [slice(None)] * dim
        hi_sl = [slice(None)] * dim
        lo_sl[a] = slice(0, n - 1)
        hi_sl[a] = slice(1, n)
        lo_sl, hi_sl = tuple(lo_sl), tuple(hi_sl)
        both = inside[lo_sl] & inside[hi_sl]
        keep = both & ~cuts[a][lo_sl]
        pair = np.stack([node_id[lo_sl][keep], node_id[hi_sl][keep]], axis=1)
        edges.append(pair)
        axis_of.append(np.full(len(pair), a, dtype=np.int64))

        padded = np.pad(inside, [(1, 1) if d == a else (0, 0) for d in range(dim)], constant_values=False)
        fwd = [slice(None)] * dim
        bwd = [slice(None)] * dim
        fwd[a] = slice(2, n + 2)
        bwd[a] = slice(0, n)
        boundary |= inside & (~padded[tuple(fwd)] | ~padded[tuple(bwd)])

    edges_arr = np.concatenate(edges) if edges else np.zeros((0, 2), dtype=np.int64)
    n_nodes = positions.shape[0]
    adj = coo_matrix(
        (np.ones(len(edges_arr)), (edges_arr[:, 0], edges_arr[:, 1])), shape=(n_nodes, n_nodes)
    )
    n_comp, raw = connected_components(adj, directed=False)
    _, first = np.unique(raw, return_index=True)
    order = np.argsort(first, kind="stable")
    relabel = np.empty(n_comp, dtype=np.int64)
    relabel[order] = np.arange(n_comp)

    logger.debug("grid graph: %d nodes, %d edges, %d components", n_nodes, len(edges_arr), n_comp)
    return graph_cls(
        ball=ball,
        resolution=n,
        step=step,
        cells=cells,
        positions=positions,
        edges=edges_arr,
        edge_axis=np.concatenate(axis_of) if axis_of else np.zeros(0, dtype=np.int64),
        boundary=boundary[inside],
        components=relabel[raw],
        n_components=int(n_comp),
        node_id=node_id,
    )
