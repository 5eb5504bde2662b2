"""
Flatness Certification

Beta numbers, normalized Hausdorff distances, and the Reifenberg,
epsilon0-minimal and (epsilon0, epsilon)-minimal check suites over a
sampled crack. Checks never raise on failure: every tested (x, r) becomes
a report record.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize
from scipy.spatial.distance import cdist
from scipy.spatial.transform import Rotation
from scipy.stats import qmc

from .crack import CrackSet
from .errors import GeometryError, LabError
from .geometry_core import (
    TETRA_EDGES,
    TETRA_VERTICES,
    Ball,
    ConeType,
    MinimalCone,
    closest_point,
    cone_triangles,
    frame_with_normal,
    is_separating,
)
from .rng import make_rng

logger = logging.getLogger(__name__)

__all__ = [
    "BadBallFamily",
    "CrackSet",
    "FlatnessRecord",
    "FlatnessReport",
    "beta",
    "bilateral_deviation",
    "check_eps0_eps_minimal",
    "check_eps_minimal",
    "check_reifenberg",
    "check_strong_eps_minimal",
    "hausdorff_distance_normalized",
    "one_sided_deviation",
]

DEFAULT_STARTS = 32
REFINE_TOL = 1e-4
EXACT_TOL = 1e-9
MAX_OPT_SAMPLES = 400
STRUCTURED_REFINE = 3
PRUNE_FACTOR = 4.0
CLUSTER_ANGLE = math.radians(12.0)

ALL_TYPES = (ConeType.P, ConeType.Y, ConeType.T)
_DOF = {ConeType.P: 2, ConeType.Y: 5, ConeType.T: 6}

_T_NORMALS = np.array(
    [np.cross(TETRA_VERTICES[i], TETRA_VERTICES[j]) for i, j in TETRA_EDGES]
)
_T_NORMALS /= np.linalg.norm(_T_NORMALS, axis=1)[:, None]


# ============================================================================
# Bad Balls
# ============================================================================

@dataclass
class BadBallFamily:
    """Balls B_i = B(x_i, r_i) centered on the crack, {2B_i} of bounded overlap"""
    centers: NDArray[np.float64]
    radii: NDArray[np.float64]
    overlap_constant: float = 1.0

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, 3)
        self.radii = np.asarray(self.radii, dtype=float).reshape(-1)
        if len(self.centers) != len(self.radii):
            raise ValueError(f"{len(self.centers)} centers but {len(self.radii)} radii")
        if np.any(self.radii <= 0):
            raise ValueError("Bad ball radii must be positive")

    @classmethod
    def empty(cls) -> "BadBallFamily":
        return cls(np.zeros((0, 3)), np.zeros(0), 1.0)

    @classmethod
    def build(
        cls,
        crack: CrackSet,
        centers: ArrayLike,
        radii: ArrayLike,
        overlap_constant: Optional[float] = None,
    ) -> "BadBallFamily":
        """Validate centers against the crack and the measured overlap of {2B_i}"""
        c = np.atleast_2d(np.asarray(centers, dtype=float))
        if c.size and c.shape[1] == 2:
            c = np.hstack([c, np.zeros((len(c), 1))])
        family = cls(c.reshape(-1, 3), radii, 1.0)
        if len(family):
            off = crack.distance(family.centers[:, : crack.dimension])
            tol = 1e-9 * max(crack.extent.radius, 1.0)
            if float(off.max()) > tol:
                i = int(np.argmax(off))
                raise GeometryError(
                    f"Bad ball center {family.centers[i].tolist()} is off the crack (distance {off[i]:.3e})"
                )
        measured = family.measure_overlap()
        if overlap_constant is None:
            family.overlap_constant = float(max(measured, 1))
        elif measured > overlap_constant:
            raise ValueError(f"Measured overlap {measured} of {{2B_i}} exceeds C0 = {overlap_constant}")
        else:
            family.overlap_constant = float(overlap_constant)
        return family

    def __len__(self) -> int:
        return len(self.radii)

    @property
    def balls(self) -> list[Ball]:
        return [Ball(c, r) for c, r in zip(self.centers, self.radii)]

    def contains(self, pts: ArrayLike, factor: float = 1.0) -> NDArray[np.bool_]:
        """Membership in the union of the balls scaled by `factor`"""
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        if p.shape[1] == 2:
            p = np.hstack([p, np.zeros((len(p), 1))])
        if not len(self):
            return np.zeros(len(p), dtype=bool)
        return np.any(cdist(p, self.centers) < factor * self.radii[None, :], axis=1)

    def measure_overlap(self, factor: float = 2.0) -> int:
        """Largest number of balls factor*B_i sharing a probe point"""
        if not len(self):
            return 0
        offsets = np.vstack([np.zeros(3), np.eye(3), -np.eye(3)]) * 0.9 * factor
        probes = (self.centers[:, None, :] + offsets[None, :, :] * self.radii[:, None, None]).reshape(-1, 3)
        inside = cdist(probes, self.centers) < factor * self.radii[None, :]
        return int(inside.sum(axis=1).max())

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["cx", "cy", "cz", "r"])
            for c, r in zip(self.centers, self.radii):
                writer.writerow([format(float(v), ".17g") for v in (*c, r)])

    @classmethod
    def from_csv(
        cls,
        path: Union[str, Path],
        crack: Optional[CrackSet] = None,
        overlap_constant: Optional[float] = None,
    ) -> "BadBallFamily":
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        try:
            centers = np.array([[float(r["cx"]), float(r["cy"]), float(r["cz"])] for r in rows]).reshape(-1, 3)
            radii = np.array([float(r["r"]) for r in rows])
        except (KeyError, ValueError) as e:
            raise ValueError(f"Malformed bad-ball CSV {path}: {e}") from e
        if crack is not None:
            return cls.build(crack, centers, radii, overlap_constant)
        return cls(centers, radii, overlap_constant or float(max(cls(centers, radii).measure_overlap(), 1)))


# ============================================================================
# Reports
# ============================================================================

@dataclass
class FlatnessRecord:
    """One tested (x, r). `beta` is the measured quantity of the clause"""
    x: NDArray[np.float64]
    r: float
    beta: float
    threshold: float
    cone: Optional[MinimalCone] = None
    clause: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.beta <= self.threshold)


@dataclass
class FlatnessReport:
    name: str
    threshold: float
    records: list[FlatnessRecord] = field(default_factory=list)
    failed_clause: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.failed_clause is None and all(r.passed for r in self.records)

    @property
    def worst(self) -> Optional[FlatnessRecord]:
        if not self.records:
            return None
        return max(self.records, key=lambda r: (r.beta - r.threshold, r.beta))

    @property
    def worst_beta(self) -> float:
        w = self.worst
        return 0.0 if w is None else float(w.beta)

    @property
    def worst_location(self) -> Optional[tuple[NDArray[np.float64], float]]:
        w = self.worst
        return None if w is None else (w.x, w.r)

    def add(self, records: Iterable[FlatnessRecord]) -> None:
        self.records.extend(_sorted_records(records))

    def to_rows(self) -> list[dict]:
        return [
            {
                "x": float(rec.x[0]),
                "y": float(rec.x[1]),
                "z": float(rec.x[2]),
                "r": float(rec.r),
                "beta": float(rec.beta),
                "type": rec.cone.cone_type.name if rec.cone is not None else "-",
                "pass": int(rec.passed),
            }
            for rec in self.records
        ]

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=["x", "y", "z", "r", "beta", "type", "pass"])
            writer.writeheader()
            for row in self.to_rows():
                writer.writerow({k: format(v, ".17g") if isinstance(v, float) else v for k, v in row.items()})


def _sorted_records(records: Iterable[FlatnessRecord]) -> list[FlatnessRecord]:
    return sorted(records, key=lambda r: (r.clause, *(float(v) for v in r.x), r.r))


# ============================================================================
# Deviations
# ============================================================================

def _point(x: ArrayLike) -> NDArray[np.float64]:
    p = np.asarray(x, dtype=float).reshape(-1)
    return np.append(p, 0.0) if p.shape[0] == 2 else p


def _ball_samples(crack: CrackSet, ball: Ball, exclude: Optional[BadBallFamily] = None) -> NDArray[np.float64]:
    pts = crack.samples_in_ball(ball)
    if exclude is not None and len(exclude) and len(pts):
        pts = pts[~exclude.contains(pts)]
    return pts


def one_sided_deviation(crack: CrackSet, cone: MinimalCone, ball: Ball) -> float:
    """(1/r) sup of d(y, cone) over crack samples y in the ball; 0 when none"""
    pts = crack.samples_in_ball(ball)
    if not len(pts):
        return 0.0
    return float(np.max(cone.distance(pts))) / ball.radius


def _cone_probes(cone: MinimalCone, ball: Ball, per_radius: int = 12) -> NDArray[np.float64]:
    tris = cone_triangles(cone, ball, ball.radius / per_radius)
    if not len(tris):
        return np.zeros((0, 3))
    verts = np.unique(tris.reshape(-1, 3), axis=0)
    return verts[np.linalg.norm(verts - _point(ball.center), axis=1) <= ball.radius]


def bilateral_deviation(crack: CrackSet, cone: MinimalCone, ball: Ball) -> float:
    """(1/r) max of sup d(y, cone) over the crack and sup d(z, crack) over the cone, in the ball"""
    one = one_sided_deviation(crack, cone, ball)
    probes = _cone_probes(cone, ball)
    if not len(probes):
        return one
    back = float(np.max(crack.distance(probes[:, : crack.dimension]))) / ball.radius
    return max(one, back)


def hausdorff_distance_normalized(E: CrackSet, F: CrackSet, ball: Ball) -> float:
    """D_{x,r}(E, F); +inf when exactly one of the sets misses the ball"""
    e = E.samples_in_ball(ball)
    f = F.samples_in_ball(ball)
    if not len(e) and not len(f):
        return 0.0
    if not len(e) or not len(f):
        return math.inf
    worst = max(float(F.distance(e).max()), float(E.distance(f).max()))
    return worst / ball.radius


# ============================================================================
# Pose Search
# ============================================================================

def _through(cone: MinimalCone, x: NDArray[np.float64]) -> MinimalCone:
    """Translate the cone so that it contains x"""
    q = closest_point(cone, x)[0]
    return MinimalCone(cone.cone_type, cone.center + (x - q), cone.rotation)


def _decode(ctype: ConeType, p: NDArray[np.float64], x: NDArray[np.float64], r: float) -> MinimalCone:
    if ctype == ConeType.P:
        th, ph = float(p[0]), float(p[1])
        n = np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
        return MinimalCone(ConeType.P, x.copy(), frame_with_normal(n))
    R = Rotation.from_rotvec(p[:3]).as_matrix()
    if ctype == ConeType.Y:
        c = x + r * (p[3] * R[:, 0] + p[4] * R[:, 1])
    else:
        c = x + r * np.asarray(p[3:6])
    return _through(MinimalCone(ctype, c, R), x)


def _encode(cone: MinimalCone, x: NDArray[np.float64], r: float) -> NDArray[np.float64]:
    if cone.cone_type == ConeType.P:
        n = cone.sectors[0].normal
        if n[2] < 0:
            n = -n
        return np.array([math.acos(float(np.clip(n[2], -1.0, 1.0))), math.atan2(n[1], n[0])])
    R = cone.rotation
    rv = Rotation.from_matrix(R).as_rotvec()
    off = (cone.center - x) / r
    if cone.cone_type == ConeType.Y:
        return np.concatenate([rv, [off @ R[:, 0], off @ R[:, 1]]])
    return np.concatenate([rv, off])


def _halton_params(ctype: ConeType, n: int) -> NDArray[np.float64]:
    """The first n quasi-random poses; prefixes agree across n"""
    sampler = qmc.Halton(d=_DOF[ctype], scramble=False)
    sampler.fast_forward(1)
    u = sampler.random(n)
    if ctype == ConeType.P:
        return np.column_stack([np.arccos(u[:, 0]), 2.0 * np.pi * u[:, 1]])
    a, b, c = u[:, 0], u[:, 1], u[:, 2]
    quat = np.column_stack([
        np.sqrt(1 - a) * np.sin(2 * np.pi * b),
        np.sqrt(1 - a) * np.cos(2 * np.pi * b),
        np.sqrt(a) * np.sin(2 * np.pi * c),
        np.sqrt(a) * np.cos(2 * np.pi * c),
    ])
    rv = Rotation.from_quat(quat).as_rotvec()
    return np.column_stack([rv, u[:, 3:] - 0.5])


def _local_triangles(crack: CrackSet, x: NDArray[np.float64], r: float) -> NDArray[np.float64]:
    tris = crack.triangles[crack.simplices_near(Ball(x, r))]
    if not len(tris):
        return tris
    return tris[np.linalg.norm(tris.mean(axis=1) - x, axis=1) <= r]


def _facet_clusters(tris: NDArray[np.float64], limit: int = 6) -> list[tuple[NDArray, NDArray, float]]:
    """Group triangle normals by direction: (mean normal, anchor point, area)"""
    if not len(tris):
        return []
    cross = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    area = np.linalg.norm(cross, axis=1)
    ok = area > 0
    normals, area, centroids = cross[ok] / area[ok, None], area[ok], tris[ok].mean(axis=1)
    remaining = np.ones(len(area), dtype=bool)
    cos_tol = math.cos(CLUSTER_ANGLE)
    out = []
    while np.any(remaining) and len(out) < limit:
        seed = int(np.argmax(np.where(remaining, area, -1.0)))
        dots = normals @ normals[seed]
        members = remaining & (np.abs(dots) >= cos_tol)
        w = area[members]
        mean = (np.sign(dots[members])[:, None] * normals[members] * w[:, None]).sum(axis=0)
        anchor = (centroids[members] * w[:, None]).sum(axis=0) / w.sum()
        out.append((mean / np.linalg.norm(mean), anchor, float(w.sum())))
        remaining &= ~members
    return out


def _fit_center(x: NDArray, clusters: Sequence[tuple[NDArray, NDArray, float]]) -> NDArray:
    """Least-squares point on all cluster planes, nearest to x"""
    A = np.array([m for m, _, _ in clusters])
    b = np.array([m @ a for m, a, _ in clusters])
    delta, *_ = np.linalg.lstsq(A, b - A @ x, rcond=None)
    return x + delta


def _pair_frame(p: NDArray, q: NDArray) -> NDArray:
    w = q - (q @ p) * p
    w /= np.linalg.norm(w)
    return np.column_stack([p, w, np.cross(p, w)])


def _structured_starts(
    ctype: ConeType,
    x: NDArray[np.float64],
    pts: NDArray[np.float64],
    clusters: list[tuple[NDArray, NDArray, float]],
) -> list[MinimalCone]:
    """Poses read off the local facet directions of the crack"""
    starts: list[MinimalCone] = []
    if ctype == ConeType.P:
        if len(pts) >= 3:
            _, _, vt = np.linalg.svd(pts - pts.mean(axis=0), full_matrices=False)
            starts.append(MinimalCone(ConeType.P, x.copy(), frame_with_normal(vt[-1])))
        for m, _, _ in clusters[:3]:
            starts.append(MinimalCone(ConeType.P, x.copy(), frame_with_normal(m)))
        return starts

    top = clusters[:4] if ctype == ConeType.T else clusters[:3]
    pairs = [(i, j) for i in range(len(top)) for j in range(i + 1, len(top))
             if abs(top[i][0] @ top[j][0]) < 0.95]

    if ctype == ConeType.Y:
        for i, j in pairs:
            e = np.cross(top[i][0], top[j][0])
            e /= np.linalg.norm(e)
            flat = [c for c in clusters if abs(c[0] @ e) < 0.2]
            center = _fit_center(x, flat)
            for m in (top[i][0], top[j][0]):
                d = np.cross(e, m)
                d /= np.linalg.norm(d)
                for sign in (1.0, -1.0):
                    ds = sign * d
                    R = np.column_stack([ds, np.cross(e, ds), e])
                    starts.append(_through(MinimalCone(ConeType.Y, center, R), x))
        return starts

    if not pairs:
        return starts
    center = _fit_center(x, clusters)
    for i, j in pairs[:2]:
        mi, mj = top[i][0], top[j][0]
        for a in range(len(_T_NORMALS)):
            for b in range(len(_T_NORMALS)):
                if a == b:
                    continue
                target = float(_T_NORMALS[a] @ _T_NORMALS[b])
                frame0 = _pair_frame(_T_NORMALS[a], _T_NORMALS[b])
                for s1, s2 in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    if abs(s1 * s2 * float(mi @ mj) - target) > 0.1:
                        continue
                    R = _pair_frame(s1 * mi, s2 * mj) @ frame0.T
                    starts.append(_through(MinimalCone(ConeType.T, center, R), x))
    return starts


class _PoseSearch:
    """Tracks the best cone through x; values are full-sample deviations"""

    def __init__(self, pts: NDArray, opt: NDArray, x: NDArray, r: float):
        self.pts, self.opt, self.x, self.r = pts, opt, x, r
        self.value = math.inf
        self.cone: Optional[MinimalCone] = None
        self.evaluations = 0

    def rough(self, cone: MinimalCone) -> float:
        return float(np.max(cone.distance(self.opt))) / self.r

    def offer(self, cone: MinimalCone) -> None:
        v = float(np.max(cone.distance(self.pts))) / self.r
        if v < self.value:
            self.value, self.cone = v, cone

    def refine(self, ctype: ConeType, p0: NDArray[np.float64]) -> None:
        dof = len(p0)

        def objective(p: NDArray) -> float:
            self.evaluations += 1
            return self.rough(_decode(ctype, p, self.x, self.r))

        simplex = np.vstack([p0, p0 + 0.1 * np.eye(dof)])
        res = minimize(
            objective,
            p0,
            method="Nelder-Mead",
            options={"initial_simplex": simplex, "xatol": REFINE_TOL, "fatol": REFINE_TOL, "maxiter": 120 * dof},
        )
        self.offer(_decode(ctype, res.x, self.x, self.r))


def beta(
    crack: CrackSet,
    x: ArrayLike,
    r: float,
    n_starts: int = DEFAULT_STARTS,
    types: Sequence[Union[str, int, ConeType]] = ALL_TYPES,
    candidates: Sequence[MinimalCone] = (),
    exclude: Optional[BadBallFamily] = None,
    seed: int = 0,
    max_samples: int = MAX_OPT_SAMPLES,
) -> tuple[float, MinimalCone]:
    """Upper bound on the infimum over cones C through x of the one-sided
    deviation of crack ∩ B(x, r) from C, with the cone that achieves it.

    Structured starts come from the local facet directions; quasi-random
    starts follow. Every start is refined by Nelder-Mead on a subsample and
    re-scored on all samples, so a larger `n_starts` never gives a larger value.
    """
    if crack.dimension != 3:
        raise ValueError("beta needs a 3D crack")
    if not r > 0:
        raise ValueError(f"Radius must be positive, got {r}")
    x = _point(x)
    off = float(crack.distance(x)[0])
    if off > 1e-9 * r:
        raise GeometryError(f"x = {x.tolist()} is not on the crack (distance {off:.3e})")

    pts = _ball_samples(crack, Ball(x, r), exclude)
    if not len(pts):
        return 0.0, MinimalCone(ConeType.P, x.copy(), np.eye(3))
    kinds = [ConeType.parse(t) for t in types]
    rng = make_rng(seed, "beta")
    opt = pts
    if len(pts) > max_samples:
        opt = pts[np.sort(rng.choice(len(pts), max_samples, replace=False))]

    search = _PoseSearch(pts, opt, x, r)
    for cone in candidates:
        search.offer(cone)

    clusters = _facet_clusters(_local_triangles(crack, x, r))
    for ctype in kinds:
        starts = _structured_starts(ctype, x, opt, clusters)
        scored = sorted(((search.rough(c), k) for k, c in enumerate(starts)), key=lambda t: t[0])
        for _, k in scored:
            search.offer(starts[k])
        if search.value <= EXACT_TOL:
            break
        for _, k in scored[:STRUCTURED_REFINE]:
            search.refine(ctype, _encode(starts[k], x, r))

    if search.value > EXACT_TOL:
        params = {t: _halton_params(t, n_starts) for t in kinds}
        for i in range(n_starts):
            for ctype in kinds:
                p = params[ctype][i]
                if search.rough(_decode(ctype, p, x, r)) > PRUNE_FACTOR * search.value:
                    continue
                search.refine(ctype, p)

    logger.debug("beta(x=%s, r=%.4g) = %.4g after %d evaluations", x.tolist(), r, search.value, search.evaluations)
    return search.value, search.cone


def _best_plane(crack: CrackSet, x: NDArray, r: float, n_starts: int) -> tuple[float, MinimalCone]:
    """Plane through x minimizing the bilateral deviation in B(x, r)"""
    ball = Ball(x, r)
    pts = crack.samples_in_ball(ball)

    def rough(p: NDArray) -> float:
        plane = _decode(ConeType.P, p, x, r)
        one = float(np.max(plane.distance(pts))) / r if len(pts) else 0.0
        probes = _cone_probes(plane, ball, 8)
        back = float(np.max(crack.index.query(probes)[0])) / r if len(probes) else 0.0
        return max(one, back)

    starts = [_encode(c, x, r) for c in _structured_starts(ConeType.P, x, pts, _facet_clusters(_local_triangles(crack, x, r)))]
    starts += list(_halton_params(ConeType.P, n_starts))
    best, best_plane = math.inf, MinimalCone(ConeType.P, x.copy(), np.eye(3))
    for p0 in starts:
        res = minimize(
            rough,
            p0,
            method="Nelder-Mead",
            options={"initial_simplex": np.vstack([p0, p0 + 0.1 * np.eye(2)]), "xatol": REFINE_TOL, "fatol": REFINE_TOL},
        )
        plane = _decode(ConeType.P, res.x, x, r)
        value = bilateral_deviation(crack, plane, ball)
        if value < best:
            best, best_plane = value, plane
    return best, best_plane


# ============================================================================
# Check Suites
# ============================================================================

def _probe_grid(
    crack: CrackSet,
    ball: Ball,
    n_centers: int,
    n_radii: int,
    rng: np.random.Generator,
    exclude: Optional[BadBallFamily] = None,
) -> list[tuple[NDArray[np.float64], float]]:
    """Crack points in B(c, r/2) and dyadic radii below r - |x - c|"""
    center = _point(ball.center)
    pts = crack.samples_in_ball(Ball(ball.center, ball.radius / 2.0))
    if exclude is not None and len(exclude) and len(pts):
        pts = pts[~exclude.contains(pts, factor=2.0)]
    if not len(pts):
        return []
    first = int(np.argmin(np.linalg.norm(pts - center, axis=1)))
    rest = np.delete(np.arange(len(pts)), first)
    picks = [first]
    if n_centers > 1 and len(rest):
        picks += list(np.sort(rng.choice(rest, min(n_centers - 1, len(rest)), replace=False)))

    probes = []
    floor = 10.0 * crack.h
    for i in picks:
        x = pts[i]
        r_max = ball.radius - float(np.linalg.norm(x - center))
        for k in range(n_radii):
            r = r_max * 2.0 ** (-k)
            if r < floor:
                logger.debug("Skipping r=%.4g below ten sampling steps", r)
                break
            probes.append((x, r))
    return probes


def _map_probes(
    fn: Callable[[tuple[NDArray, float]], FlatnessRecord],
    probes: list[tuple[NDArray, float]],
    jobs: int,
) -> list[FlatnessRecord]:
    if jobs <= 1:
        return [fn(p) for p in probes]
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(fn, probes))


def _require_3d(crack: CrackSet) -> None:
    if crack.dimension != 3:
        raise ValueError("Flatness checks need a 3D crack")


def check_reifenberg(
    crack: CrackSet,
    ball: Ball,
    eps0: float,
    n_centers: int = 4,
    n_radii: int = 3,
    *,
    n_starts: int = 8,
    seed: int = 0,
    jobs: int = 1,
) -> FlatnessReport:
    """Bilateral closeness to planes through x at every sampled (x, r)"""
    _require_3d(crack)
    probes = _probe_grid(crack, ball, n_centers, n_radii, make_rng(seed, "reifenberg"))

    def one(probe: tuple[NDArray, float]) -> FlatnessRecord:
        x, r = probe
        value, plane = _best_plane(crack, x, r, n_starts)
        return FlatnessRecord(x, r, value, eps0, plane, "reifenberg")

    report = FlatnessReport("reifenberg", eps0)
    report.add(_map_probes(one, probes, jobs))
    logger.info("check_reifenberg: %d probes, worst %.4g", len(report.records), report.worst_beta)
    return report


def check_eps_minimal(
    crack: CrackSet,
    ball: Ball,
    eps0: float,
    n_centers: int = 4,
    n_radii: int = 3,
    *,
    n_starts: int = 8,
    exclude: Optional[BadBallFamily] = None,
    seed: int = 0,
    jobs: int = 1,
) -> FlatnessReport:
    """beta(x, r) <= eps0 at every sampled (x, r). With `exclude`, centers avoid
    the doubled bad balls and the bad balls are removed from the crack."""
    _require_3d(crack)
    probes = _probe_grid(crack, ball, n_centers, n_radii, make_rng(seed, "eps-minimal"), exclude)

    def one(probe: tuple[NDArray, float]) -> FlatnessRecord:
        x, r = probe
        value, cone = beta(crack, x, r, n_starts=n_starts, exclude=exclude, seed=seed)
        return FlatnessRecord(x, r, value, eps0, cone, "eps-minimal")

    report = FlatnessReport("eps-minimal", eps0)
    report.add(_map_probes(one, probes, jobs))
    logger.info("check_eps_minimal: %d probes, worst %.4g", len(report.records), report.worst_beta)
    return report


def check_strong_eps_minimal(
    crack: CrackSet,
    ball: Ball,
    eps0: float,
    n_centers: int = 4,
    n_radii: int = 3,
    *,
    n_starts: int = 8,
    seed: int = 0,
    jobs: int = 1,
) -> FlatnessReport:
    """Bilateral variant: the beta minimizer must also lie close to the crack"""
    _require_3d(crack)
    probes = _probe_grid(crack, ball, n_centers, n_radii, make_rng(seed, "strong"))

    def one(probe: tuple[NDArray, float]) -> FlatnessRecord:
        x, r = probe
        _, cone = beta(crack, x, r, n_starts=n_starts, seed=seed)
        return FlatnessRecord(x, r, bilateral_deviation(crack, cone, Ball(x, r)), eps0, cone, "strong")

    report = FlatnessReport("strong-eps-minimal", eps0)
    report.add(_map_probes(one, probes, jobs))
    return report


def check_eps0_eps_minimal(
    crack: CrackSet,
    ball: Ball,
    eps0: float,
    eps: float,
    bad: BadBallFamily,
    cone0: MinimalCone,
    *,
    n_centers: int = 4,
    n_radii: int = 4,
    n_starts: int = 8,
    resolution: int = 48,
    seed: int = 0,
    jobs: int = 1,
) -> FlatnessReport:
    """Clauses i) to v) of (eps0, eps)-minimality in `ball`.

    i) bad radii at most eps; ii) eps0-minimal away from the bad balls;
    iii) crack within eps of cone0; iv) beta control at each bad center above
    its radius; v) the crack separates the cone0 regions.

    Clause iv starts at r_i (1 + 1e-6) and doubles. Clause v uses the
    relative slab width eps / r, the same tube clause iii certifies.
    """
    _require_3d(crack)
    center = _point(ball.center)
    if cone0.center_distance(center) > 1e-9 * ball.radius:
        raise ValueError("cone0 must be centered at the ball center")

    report = FlatnessReport("eps0-eps-minimal", eps0)
    failed: list[str] = []

    clause_i = [FlatnessRecord(c, float(r), float(r), eps, None, "i") for c, r in zip(bad.centers, bad.radii)]
    report.add(clause_i)
    if not all(rec.passed for rec in clause_i):
        failed.append("i")

    minimal = check_eps_minimal(
        crack, ball, eps0, n_centers, 3, n_starts=n_starts, exclude=bad, seed=seed, jobs=jobs
    )
    for rec in minimal.records:
        rec.clause = "ii"
    report.add(minimal.records)
    if not minimal.passed:
        failed.append("ii")

    pts = crack.samples_in_ball(ball)
    dev = float(np.max(cone0.distance(pts))) if len(pts) else 0.0
    report.add([FlatnessRecord(center, ball.radius, dev / ball.radius, eps / ball.radius, cone0, "iii")])
    if dev > eps:
        failed.append("iii")

    probes = []
    for c, ri in zip(bad.centers, bad.radii):
        r = ri * (1.0 + 1e-6)
        for _ in range(n_radii):
            if float(np.linalg.norm(c - center)) + r > ball.radius:
                break
            probes.append((c, r))
            r *= 2.0

    def one(probe: tuple[NDArray, float]) -> FlatnessRecord:
        x, r = probe
        value, cone = beta(crack, x, r, n_starts=n_starts, seed=seed)
        return FlatnessRecord(x, r, value, eps0, cone, "iv")

    clause_iv = _map_probes(one, probes, jobs)
    report.add(clause_iv)
    if not all(rec.passed for rec in clause_iv):
        failed.append("iv")

    try:
        separating = is_separating(crack, cone0, ball, eps / ball.radius, resolution)
    except LabError as e:
        logger.warning("Separation check failed: %s", e)
        separating = False
    report.add([FlatnessRecord(center, ball.radius, float(not separating), 0.0, cone0, "v")])
    if not separating:
        failed.append("v")

    report.failed_clause = failed[0] if failed else None
    logger.info("check_eps0_eps_minimal: failed clauses %s", failed or "none")
    return report
