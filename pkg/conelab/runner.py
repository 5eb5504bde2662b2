"""
Scenario Runner

Builds the crack a scenario describes, fans its trials out over a thread
pool driven from asyncio, and fills a ResultStore with tables, plots and
verdicts.
"""

import asyncio
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, TypeVar, Union

import numpy as np

from .config import LabConfig, load_config
from .crack import CrackSet, cone_crack, load_triangle_soup, segments_crack, tube_crack, wrinkled_cone
from .errors import ConfigError, ExtensionError, LabError
from .flatness import BadBallFamily, check_eps0_eps_minimal
from .geometry_core import Ball, MinimalCone, frame_with_normal, make_cone, sample_cone
from .harmonic import (
    BONNET_BOUND,
    decay_experiment,
    differential_inequality_check,
    discretize,
    energy_profile,
    minimize_energy,
    normalized_energy,
    smooth_boundary_data,
    tube_counterexample,
)
from .plotting import plot_profile
from .results import ResultStore, Verdict
from .rng import make_rng
from .spherical import (
    band_limited_field,
    first_eigenvalue,
    mesh_domain,
    mesh_half_domain,
    mixed_comparison,
    poincare_check,
)
from .whitney import (
    build_delta,
    build_extension,
    check_cover,
    energy_comparison,
    partition_matrix,
    select_whitney_balls,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

CRACK_EXTENT = 1.2
CRACK_H = 0.05
WRINKLE_REACH = 0.6
MONOTONE_SWEEP = (0.15, 0.85)
MONOTONE_DECAY_RADII = (0.5, 0.7)
EIGEN_WINDOW = (1.96, 2.04)
POINCARE_BOUND = 0.5 * 1.03
SHARP_WITNESS = 0.47

# ============================================================================
# Trial Fan-Out
# ============================================================================

async def fan_out(fn: Callable[[int], T], n: int, jobs: int = 1) -> List[T]:
    """Run fn(0..n-1), concurrently when jobs > 1; results in submission order"""
    if jobs <= 1:
        return [fn(i) for i in range(n)]
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        futures = [loop.run_in_executor(executor, fn, i) for i in range(n)]
        return list(await asyncio.gather(*futures))


def run_trials(fn: Callable[[int], T], n: int, jobs: int = 1) -> List[T]:
    return asyncio.run(fan_out(fn, n, jobs))

# ============================================================================
# Crack Construction
# ============================================================================

@dataclass
class CrackInstance:
    """A crack with its reference cone and bad balls"""
    crack: CrackSet
    cone0: Optional[MinimalCone]
    bad: BadBallFamily


def _rays_2d(angles: Sequence[float], length: float = CRACK_EXTENT) -> np.ndarray:
    return np.array([[[0.0, 0.0], [length * math.cos(a), length * math.sin(a)]] for a in angles])


def build_crack(cfg: LabConfig, trial: int = 0) -> CrackInstance:
    """Crack named by the geometry section; wrinkles are placed per trial"""
    geo = cfg.geometry
    dim = geo.dimension
    name = geo.crack
    if name == "empty":
        return CrackInstance(CrackSet.empty(dim, CRACK_H), None, BadBallFamily.empty())
    if name == "tube":
        if dim != 2:
            raise ConfigError("The tube crack is two-dimensional (geometry.dimension: 2)")
        return CrackInstance(tube_crack(cfg.decay.tube_eps, CRACK_H / 2), None, BadBallFamily.empty())
    if name == "file":
        path = Path(geo.crack_file).expanduser()
        if not path.exists():
            raise ConfigError(f"Crack file not found: {path}")
        return CrackInstance(load_triangle_soup(path, CRACK_H), None, BadBallFamily.empty())

    if dim == 2:
        if name == "P":
            cone = make_cone("P", rotation=frame_with_normal([0.0, 1.0, 0.0]))
            crack = segments_crack([[[-CRACK_EXTENT, 0.0], [CRACK_EXTENT, 0.0]]], CRACK_H)
        elif name == "Y":
            cone = make_cone("Y")
            crack = segments_crack(_rays_2d([0.0, 2 * math.pi / 3, 4 * math.pi / 3]), CRACK_H)
        else:
            raise ConfigError("T cracks need geometry.dimension: 3")
        if geo.wrinkles:
            raise ConfigError("Wrinkles are built on 3D cone cracks")
        return CrackInstance(crack, cone, BadBallFamily.empty())

    cone = make_cone(name)
    extent = Ball(np.zeros(3), CRACK_EXTENT)
    if not geo.wrinkles:
        return CrackInstance(cone_crack(cone, extent, CRACK_H), cone, BadBallFamily.empty())

    eps = cfg.flatness.eps
    rng = make_rng(cfg.scenario.seed, f"wrinkles-{trial}")
    pts = sample_cone(cone, Ball(np.zeros(3), WRINKLE_REACH), 8 * geo.wrinkles, rng)
    pts = pts[np.linalg.norm(pts, axis=1) > 4 * eps]
    centers: list[np.ndarray] = []
    for p in pts:
        if all(np.linalg.norm(p - q) > 8 * eps for q in centers):
            centers.append(p)
        if len(centers) == geo.wrinkles:
            break
    radii = eps * rng.uniform(0.5, 1.0, size=len(centers))
    centers_a = np.array(centers).reshape(-1, 3)
    crack = wrinkled_cone(cone, extent, CRACK_H, centers_a, radii, 0.25 * eps)
    bad = BadBallFamily.build(crack, centers_a, radii, cfg.flatness.overlap_constant)
    return CrackInstance(crack, cone, bad)


def _boundary_samples(cfg: LabConfig, dim: int) -> list:
    return [
        smooth_boundary_data(make_rng(cfg.scenario.seed, f"boundary-{i}"), cfg.decay.degree, dim)
        for i in range(cfg.scenario.trials)
    ]


def _profile_outputs(store: ResultStore, profile, name: str = "profile") -> None:
    store.write_csv(f"{name}.csv", profile.to_rows(), ["r", "E", "omega2"])
    plot_profile(store.path(f"{name}.csv"), store.add_plot(f"{name}.svg"), title=f"{store.config.scenario.kind} ({name})")

# ============================================================================
# Scenarios
# ============================================================================

def _certify(cfg: LabConfig, inst: CrackInstance, trial: int = 0):
    fl = cfg.flatness
    return check_eps0_eps_minimal(
        inst.crack, Ball(np.zeros(3), 1.0), fl.eps0, fl.eps, inst.bad, inst.cone0,
        n_centers=fl.n_centers, n_radii=fl.n_radii, n_starts=fl.n_starts,
        seed=cfg.scenario.seed + trial, jobs=cfg.scenario.jobs,
    )


def run_decay(cfg: LabConfig, store: ResultStore) -> None:
    """omega2(0, r) against r^gamma over seeded boundary data"""
    inst = build_crack(cfg)
    dec, dim = cfg.decay, inst.crack.dimension
    certificate = None
    if inst.cone0 is not None and dim == 3:
        certificate = _certify(cfg, inst)
        certificate.to_csv(store.path("certificate.csv"))
        store.tables.append("certificate.csv")
        store.add_verdict(Verdict(
            "certificate", certificate.passed, certificate.worst_beta, cfg.flatness.eps0,
            f"failed clause {certificate.failed_clause}" if certificate.failed_clause else "", "flatness",
        ))
        if not certificate.passed:
            store.add_verdict(Verdict("decay", False, math.nan, dec.r ** dec.gamma * (1 + dec.tol), "crack not certified", "harmonic"))
            return

    samples = _boundary_samples(cfg, dim)
    report = decay_experiment(
        inst.crack, samples, dec.r,
        certificate=certificate, allow_uncertified=certificate is None,
        gamma=dec.gamma, tol=dec.tol, resolution=cfg.geometry.resolution,
        bad=inst.bad, rho=cfg.whitney.rho, U=cfg.whitney.U, jobs=cfg.scenario.jobs,
    )
    store.write_csv("ratios.csv", [{"trial": i, "ratio": v} for i, v in enumerate(report.values)], ["trial", "ratio"])
    store.add_verdict(Verdict(
        "decay", report.passed, report.worst, report.bound,
        f"{len(report.values)} trials, {report.vacuous} vacuous", "harmonic",
    ))

    graph = discretize(inst.crack, cfg.geometry.resolution, dim)
    profile = energy_profile(minimize_energy(graph, samples[0]), dec.radii)
    _profile_outputs(store, profile)


def run_monotonicity(cfg: LabConfig, store: ResultStore) -> None:
    """Monotone omega2 sweep, decay ratios and E <= r E' / (2 sqrt 2) per trial"""
    inst = build_crack(cfg)
    dim = inst.crack.dimension
    graph = discretize(inst.crack, cfg.geometry.resolution, dim)
    samples = _boundary_samples(cfg, dim)
    sweep = np.asarray(cfg.decay.radii) if cfg.decay.radii else np.linspace(*MONOTONE_SWEEP, 36)
    ratio_bound = 2.0 ** (-cfg.decay.gamma) * (1 + cfg.decay.tol)

    def one(i: int) -> dict:
        u = minimize_energy(graph, samples[i])
        profile = energy_profile(u, sweep)
        diff = differential_inequality_check(u, sweep)
        origin = np.zeros(dim)
        ratios = []
        for r in MONOTONE_DECAY_RADII:
            outer = normalized_energy(u, origin, r)
            if outer > 0:
                ratios.append(normalized_energy(u, origin, r / 2) / outer)
        return {
            "trial": i,
            "max_drop": max((d for _, d in profile.violations), default=0.0),
            "max_ratio": diff.max_ratio,
            "decay_ratio": max(ratios) if ratios else math.nan,
            "gamma_hat": profile.gamma_hat,
            "vacuous": profile.vacuous,
            "profile": profile,
        }

    rows = run_trials(one, cfg.scenario.trials, cfg.scenario.jobs)
    fields = ["trial", "max_drop", "max_ratio", "decay_ratio", "gamma_hat", "vacuous"]
    store.write_csv("trials.csv", [{k: row[k] for k in fields} for row in rows], fields)
    _profile_outputs(store, rows[0]["profile"])

    live = [row for row in rows if not row["vacuous"]]
    worst_drop = max((row["max_drop"] for row in live), default=0.0)
    worst_ratio = max((row["max_ratio"] for row in live), default=0.0)
    worst_decay = max((row["decay_ratio"] for row in live if not math.isnan(row["decay_ratio"])), default=math.nan)
    store.add_verdict(Verdict("monotone", worst_drop <= cfg.decay.slack, worst_drop, cfg.decay.slack, source="harmonic"))
    store.add_verdict(Verdict("differential", worst_ratio <= BONNET_BOUND + 0.05, worst_ratio, BONNET_BOUND + 0.05, source="harmonic"))
    store.add_verdict(Verdict(
        "decay_ratio", not math.isnan(worst_decay) and worst_decay <= ratio_bound, worst_decay, ratio_bound,
        f"r in {list(MONOTONE_DECAY_RADII)}", "harmonic",
    ))


def run_counterexample(cfg: LabConfig, store: ResultStore) -> None:
    """The tube must defeat the decay bound; the verdict passes when it does"""
    dec = cfg.decay
    profile = tube_counterexample(dec.tube_eps, dec.tube_M, cfg.geometry.resolution, dec.radii)
    _profile_outputs(store, profile, "tube_profile")
    u = profile.u
    origin = np.zeros(2)
    ratio = normalized_energy(u, origin, dec.r) / normalized_energy(u, origin, 1.0)
    bound = dec.r ** dec.gamma * (1 + dec.tol)
    store.add_verdict(Verdict("tube_violates_decay", ratio > bound, ratio, bound, "required failure of the decay bound", "harmonic"))
    flat = -0.15 <= profile.gamma_hat <= 0.15
    store.add_verdict(Verdict("tube_flat_profile", flat, profile.gamma_hat, 0.15, "|gamma_hat| <= 0.15", "harmonic"))


def _domain_mesh(cfg: LabConfig, cone: MinimalCone):
    sp = cfg.spectral
    if sp.bc == "mixed":
        return mesh_half_domain(cone, sp.component, sp.symmetry_axis, 1.0, sp.target_h)
    return mesh_domain(cone, 1.0, sp.component, sp.target_h)


def run_eigen(cfg: LabConfig, store: ResultStore) -> None:
    """First eigenvalue of the cone's spherical domain, and Poincare ratios"""
    sp = cfg.spectral
    cone = make_cone(cfg.geometry.cone)
    mesh = _domain_mesh(cfg, cone)
    mesh.export_off(store.path("domain.off"))
    result = first_eigenvalue(mesh)
    store.write_json("eigen.json", result.to_json())
    store.write_csv(
        "eigen.csv",
        [{"lambda1": result.lambda1, "h": result.h, "extrapolated": result.extrapolated, "multiplicity": result.multiplicity}],
        ["lambda1", "h", "extrapolated", "multiplicity"],
    )
    value = result.extrapolated if result.extrapolated is not None else result.lambda1
    lo, hi = EIGEN_WINDOW
    if cone.cone_type.name == "T" and sp.bc == "neumann":
        store.add_verdict(Verdict("lambda1", value >= lo, value, lo, "lambda1 >= 1.96", "spherical"))
    else:
        store.add_verdict(Verdict("lambda1", lo <= value <= hi, value, 2.0, "lambda1 in [1.96, 2.04]", "spherical"))

    if cone.cone_type.name == "T" and sp.bc == "mixed":
        cmp = mixed_comparison(cone, sp.component, sp.symmetry_axis, sp.target_h, sp.tol)
        store.write_json("mixed.json", {
            "lambda_full": cmp.lambda_full, "mu_half_domain": cmp.mu_half_domain,
            "lambda_half_neumann": cmp.lambda_half_neumann, "mu_half_lune": cmp.mu_half_lune,
            "reflection_gap": cmp.reflection_gap,
        })
        store.add_verdict(Verdict("mixed_chain", cmp.passed, cmp.lambda_full, cmp.mu_half_lune, source="spherical"))

    if sp.bc == "neumann" and sp.fields:
        rng = make_rng(cfg.scenario.seed, "poincare")
        fields = [band_limited_field(rng) for _ in range(sp.fields)]
        report = poincare_check(mesh, fields)
        store.write_csv("poincare.csv", [{"field": i, "ratio": v} for i, v in enumerate(report.ratios)], ["field", "ratio"])
        store.add_verdict(Verdict(
            "poincare", report.max_ratio <= POINCARE_BOUND, report.max_ratio, POINCARE_BOUND,
            f"{len(report.ratios)} fields, {report.skipped} vacuous", "spherical",
        ))
        if cone.cone_type.name == "Y":
            spine = cone.rotation[:, 2]
            witness = poincare_check(mesh, [lambda p: p @ spine]).max_ratio
            store.add_verdict(Verdict("poincare_sharp", witness >= SHARP_WITNESS, witness, SHARP_WITNESS, "degree-1 witness", "spherical"))


def run_whitney(cfg: LabConfig, store: ResultStore) -> None:
    """Randomized cover instances: cover clauses, partition sums, energy comparison"""
    wh, geo = cfg.whitney, cfg.geometry
    dim = geo.dimension
    if dim == 2:
        cone0 = make_cone("P", rotation=frame_with_normal([0.0, 1.0, 0.0]))
        crack = segments_crack([[[-CRACK_EXTENT, 0.0], [CRACK_EXTENT, 0.0]]], CRACK_H / 2)
    else:
        cone0 = make_cone("P", rotation=frame_with_normal([0.0, 0.0, 1.0]))
        crack = cone_crack(cone0, Ball(np.zeros(3), CRACK_EXTENT), CRACK_H)
    graph = discretize(crack, geo.resolution, dim) if wh.energy else None
    domain = Ball(np.zeros(dim), 0.9)

    def one(i: int) -> dict:
        rng = make_rng(cfg.scenario.seed, f"whitney-{i}")
        n_bad = int(rng.integers(0, wh.n_bad + 1))
        x = rng.uniform(-0.6, 0.6, size=n_bad)
        centers = np.zeros((n_bad, 3))
        if dim == 2:
            centers[:, 0] = x
        else:
            centers[:, 0], centers[:, 1] = x, rng.uniform(-0.6, 0.6, size=n_bad)
        radii = cfg.flatness.eps * rng.uniform(0.5, 1.0, size=n_bad)
        try:
            bad = BadBallFamily.build(crack, centers, radii)
        except ValueError as e:
            return {"trial": i, "balls": 0, "violations": f"bad-family: {e}", "partition_gap": math.nan, "empirical_C": math.nan}
        delta = build_delta(bad, wh.rho, wh.h, cone0, dim, seed=cfg.scenario.seed + i)
        U = max(wh.U, 30.0 * delta.lipschitz_constant)
        cover = select_whitney_balls(crack, delta, U, domain, cone0=cone0)
        if i == 0:
            cover.to_csv(store.path("cover.csv"))
        report = check_cover(cover, crack, n_probe=wh.n_probe, overlap_bound=wh.overlap_bound, seed=cfg.scenario.seed + i)
        violations = list(report.violations)

        probes = rng.uniform(-0.9, 0.9, size=(wh.n_probe, dim))
        part = partition_matrix(cover, probes)
        theta_sum = part.theta0 + np.asarray(part.theta.sum(axis=1)).ravel()
        gap = float(np.max(np.abs(theta_sum - 1.0)))
        if gap > 1e-9:
            violations.append("partition-sum")
        if np.any(part.total < 1.0 - 1e-12):
            violations.append("sum-at-least-one")

        empirical = math.nan
        if graph is not None and len(cover):
            u = minimize_energy(graph, smooth_boundary_data(rng, cfg.decay.degree, dim))
            worst = 0.0
            for k in np.unique(graph.components[graph.boundary]):
                k = int(k)
                try:
                    ext = build_extension(u, cover, k)
                except ExtensionError as e:
                    violations.append(f"extension: {e}")
                    continue
                worst = max(worst, energy_comparison(u, ext, cover, k, wh.rho).empirical_C)
            empirical = worst
        return {
            "trial": i, "balls": len(cover), "violations": ";".join(violations),
            "partition_gap": gap, "empirical_C": empirical,
        }

    rows = run_trials(one, cfg.scenario.trials, cfg.scenario.jobs)
    store.tables.append("cover.csv")
    store.write_csv("whitney.csv", rows, ["trial", "balls", "violations", "partition_gap", "empirical_C"])
    failed = [row for row in rows if row["violations"]]
    store.add_verdict(Verdict(
        "cover_clauses", not failed, float(len(failed)), 0.0,
        f"{len(rows)} instances" + (f", first failure: {failed[0]['violations']}" if failed else ""), "whitney",
    ))
    if wh.energy:
        finite = [row["empirical_C"] for row in rows if not math.isnan(row["empirical_C"])]
        worst = max(finite, default=0.0)
        store.add_verdict(Verdict("energy_constant", worst <= wh.golden_C, worst, wh.golden_C, source="whitney"))


def run_flatness(cfg: LabConfig, store: ResultStore) -> None:
    """(eps0, eps)-minimal certificates of seeded wrinkled cones"""
    if cfg.geometry.dimension != 3 or cfg.geometry.crack not in ("P", "Y", "T"):
        raise ConfigError("Flatness scenarios run on 3D cone cracks (geometry.crack: P, Y or T)")

    def one(i: int) -> dict:
        inst = build_crack(cfg, i)
        report = _certify(cfg, inst, i)
        if i == 0:
            report.to_csv(store.path("flatness.csv"))
            inst.bad.to_csv(store.path("bad_balls.csv"))
        return {
            "trial": i, "bad_balls": len(inst.bad), "worst_beta": report.worst_beta,
            "failed_clause": report.failed_clause or "", "passed": report.passed,
        }

    rows = run_trials(one, cfg.scenario.trials, cfg.scenario.jobs)
    store.tables += ["flatness.csv", "bad_balls.csv"]
    store.write_csv("trials.csv", rows, ["trial", "bad_balls", "worst_beta", "failed_clause", "passed"])
    failed = [row for row in rows if not row["passed"]]
    worst = max(row["worst_beta"] for row in rows)
    store.add_verdict(Verdict(
        "eps0_eps_minimal", not failed, worst, cfg.flatness.eps0,
        f"first failed clause {failed[0]['failed_clause']}" if failed else f"{len(rows)} instances", "flatness",
    ))


SCENARIOS: dict[str, Callable[[LabConfig, ResultStore], None]] = {
    "decay": run_decay,
    "monotonicity": run_monotonicity,
    "counterexample": run_counterexample,
    "eigen": run_eigen,
    "whitney": run_whitney,
    "flatness": run_flatness,
}


def run_config(cfg: LabConfig, out: Optional[str] = None) -> ResultStore:
    """Execute a validated scenario"""
    kind = cfg.scenario.kind
    if kind not in SCENARIOS:
        raise ConfigError(f"Unknown scenario kind: {kind}")
    store = ResultStore.create(cfg, out)
    logger.info("Scenario %s (run %s) started", kind, store.run_id)
    try:
        SCENARIOS[kind](cfg, store)
    except LabError as e:
        raise type(e)(f"{kind} scenario: {e}") from e
    store.finalize()
    logger.info("Scenario %s finished: %s", kind, "pass" if store.passed else "FAIL")
    return store


def run(config_path: Union[str, Path, None], **overrides) -> ResultStore:
    """Load, override (seed, jobs, out) and execute a scenario file"""
    cfg = load_config(config_path).with_overrides(**overrides)
    return run_config(cfg)
