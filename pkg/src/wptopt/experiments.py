"""Reproduction studies: LoD convergence, scheme comparison, heatmaps, and
Rician-fading sensitivity ensembles, with CSV reports.

All numbers are written with 12 significant digits and every run is
deterministic for a fixed configuration and seed, so reports are bit-identical
across reruns.
"""

from __future__ import annotations

import concurrent.futures
import csv
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .certificate import (
    OptimalityCertificate,
    check_structure,
    solution_for_allocation,
    verify_optimality,
)
from .channel import GainMatrix, PhysicalParams, RicianSampler, gain_matrix
from .geometry import ArrayLayout, LatticeGrid, RoomGeometry, build_rx_grid, build_tx_grid
from .schemes import (
    SchemeResult,
    evaluate_min_power,
    loss_ratio,
    scheme_far_field,
    scheme_percentile_prune,
    scheme_uniform,
)
from .solver import (
    MaxMinSolution,
    PowerAllocation,
    extract_support,
    solve_maxmin,
    solve_symmetric_reduced,
)

#: Height-to-width presets: 2 m ceiling height, square floor.
ENVIRONMENTS = {
    "1-1": RoomGeometry(len_x=2.0, len_y=2.0, len_z=2.0),
    "1-3": RoomGeometry(len_x=6.0, len_y=2.0, len_z=6.0),
    "1-4": RoomGeometry(len_x=8.0, len_y=2.0, len_z=8.0),
    "1-5": RoomGeometry(len_x=10.0, len_y=2.0, len_z=10.0),
}

SUPPORT_THRESHOLD = 1e-6


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{value:.12g}"
    return str(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def full_ceiling_layout(room: RoomGeometry, lod: int, dimensionality: str = "two_d") -> ArrayLayout:
    """Array covering the entire ceiling, the configuration studied throughout."""
    return ArrayLayout(
        dimensionality=dimensionality,
        extent_x=room.len_x,
        extent_z=room.len_z,
        lod=lod,
    )


@dataclass(frozen=True)
class EnvironmentSolution:
    """One solved + certified environment instance."""

    room: RoomGeometry
    layout: ArrayLayout
    tx_grid: LatticeGrid
    rx_grid: LatticeGrid
    gains: GainMatrix
    solution: MaxMinSolution
    certificate: OptimalityCertificate
    antenna_count: int


def solve_environment(
    room: RoomGeometry,
    layout: ArrayLayout,
    tol: float = 1e-9,
    rx_lod: int | None = None,
    use_reduction: bool = True,
    tol_cert: float = 1e-6,
) -> EnvironmentSolution:
    """Build grids, solve the max-min problem, and certify the result."""
    tx_grid = build_tx_grid(layout, room)
    rx_grid = build_rx_grid(room, rx_lod if rx_lod is not None else layout.lod)
    gains = gain_matrix(tx_grid, rx_grid)
    if use_reduction:
        solution = solve_symmetric_reduced(gains, tol=tol)
    else:
        solution = solve_maxmin(gains, tol=tol)
    certificate = verify_optimality(solution, gains, tol_cert=tol_cert)
    structure = check_structure(solution, tx_grid, threshold=SUPPORT_THRESHOLD)
    return EnvironmentSolution(
        room=room,
        layout=layout,
        tx_grid=tx_grid,
        rx_grid=rx_grid,
        gains=gains,
        solution=solution,
        certificate=certificate,
        antenna_count=structure.nonzero_count,
    )


@dataclass(frozen=True)
class LodSweepSeries:
    """Objective values and thresholded antenna counts across lods."""

    lods: list
    objectives: list
    rel_diffs: list            # |m_i - m_{i-1}| / m_i in percent; first entry nan
    antenna_counts: list

    def rows(self):
        return list(zip(self.lods, self.objectives, self.rel_diffs, self.antenna_counts))


def run_lod_sweep(
    room: RoomGeometry,
    dimensionality: str,
    lods,
    tol: float = 1e-9,
) -> LodSweepSeries:
    """Solve and certify the same environment at increasing granularity."""
    lods = list(lods)
    if any(b <= a for a, b in zip(lods, lods[1:])):
        raise ValueError("lods must be strictly increasing")
    objectives, counts, rel_diffs = [], [], []
    for i, lod in enumerate(lods):
        env = solve_environment(room, full_ceiling_layout(room, lod, dimensionality), tol=tol)
        if not env.certificate.passed:
            raise RuntimeError(f"certificate failed at lod {lod}")
        m = env.solution.objective_m
        objectives.append(m)
        counts.append(env.antenna_count)
        rel_diffs.append(
            float("nan") if i == 0 else abs(m - objectives[i - 1]) / m * 100.0
        )
    return LodSweepSeries(lods, objectives, rel_diffs, counts)


@dataclass(frozen=True)
class ComparisonRow:
    environment: str
    scheme_id: str
    min_power_watts: float
    loss_vs_opt: float
    antenna_count: int
    certificate_passed: bool


def run_scheme_comparison(
    rooms: dict,
    lod: int = 81,
    params: PhysicalParams | None = None,
    tol: float = 1e-9,
    dimensionality: str = "two_d",
    schemes=("m_opt", "m_ff", "m_uni", "m_s75"),
):
    """Per environment: certified M-OPT plus benchmark schemes and losses.

    Returns (rows, environments) where rows are ComparisonRow records and
    environments maps the environment name to its EnvironmentSolution.
    """
    params = params or PhysicalParams()
    rows: list[ComparisonRow] = []
    environments: dict[str, EnvironmentSolution] = {}
    for name, room in rooms.items():
        env = solve_environment(room, full_ceiling_layout(room, lod, dimensionality), tol=tol)
        if not env.certificate.passed:
            raise RuntimeError(f"M-OPT certificate failed for environment {name}")
        environments[name] = env
        opt_alloc = extract_support(env.solution.allocation, SUPPORT_THRESHOLD)
        opt_power = evaluate_min_power(opt_alloc, env.gains, params)

        def _alloc(scheme_id: str) -> PowerAllocation:
            if scheme_id == "m_opt":
                return opt_alloc
            if scheme_id == "m_ff":
                return scheme_far_field(env.tx_grid)
            if scheme_id == "m_uni":
                return scheme_uniform(env.tx_grid)
            if scheme_id == "m_s75":
                return scheme_percentile_prune(opt_alloc, 75.0)
            raise ValueError(f"unknown scheme {scheme_id!r}")

        for scheme_id in schemes:
            alloc = _alloc(scheme_id)
            watts = evaluate_min_power(alloc, env.gains, params)
            cert = (
                env.certificate
                if scheme_id == "m_opt"
                else verify_optimality(solution_for_allocation(alloc, env.gains), env.gains)
            )
            rows.append(
                ComparisonRow(
                    environment=name,
                    scheme_id=scheme_id,
                    min_power_watts=watts,
                    loss_vs_opt=loss_ratio(watts, opt_power),
                    antenna_count=alloc.support_size,
                    certificate_passed=cert.passed,
                )
            )
    return rows, environments


@dataclass(frozen=True)
class FadingEnsembleReport:
    """Aggregate sensitivity statistics over seeded Rician realizations."""

    realizations: int
    mean_support_fraction: float       # percent of grid cells, re-optimized
    support_cov: float                 # percent
    mean_relative_performance: float   # percent: mean LoS-opt power / mean re-opt power
    performance_cov: float             # percent, CoV of per-realization ratios
    mode: str                          # "shared" or "independent" NLoS
    seed_base: int
    lod: int
    los_support_fraction: float        # percent, LoS-optimal allocation
    los_objective: float


_ENSEMBLE_CTX: dict = {}


def _fading_worker(index: int):
    ctx = _ENSEMBLE_CTX
    sampler: RicianSampler = ctx["sampler"]
    realization = sampler.sample(ctx["seed_base"], index=index)
    faded = realization.faded_gains.entries
    los_power = float((faded @ ctx["los_weights"]).min())
    solution = solve_maxmin(faded, tol=ctx["tol"])
    count = int(np.count_nonzero(solution.allocation.weights >= SUPPORT_THRESHOLD))
    return index, los_power, solution.objective_m, count


def run_fading_ensemble(
    room: RoomGeometry,
    layout: ArrayLayout,
    params: PhysicalParams,
    n_realizations: int = 200,
    seed_base: int = 0,
    mode: str = "shared",
    tol: float = 1e-9,
    n_jobs: int = 1,
) -> FadingEnsembleReport:
    """Monte Carlo sensitivity of the LoS-optimal deployment to Rician fading.

    Per realization the faded gains are sampled, the LoS-optimal allocation is
    evaluated on them, and the problem is re-solved from scratch; aggregates
    follow the ratio-of-means convention and sample (n-1) CoVs.  Realizations
    are keyed by (seed_base, index), so results do not depend on evaluation
    order or on n_jobs.
    """
    if n_realizations < 2:
        raise ValueError("need at least two realizations")
    if mode not in ("shared", "independent"):
        raise ValueError("mode must be 'shared' or 'independent'")
    env = solve_environment(room, layout, tol=tol)
    los_alloc = extract_support(env.solution.allocation, SUPPORT_THRESHOLD)
    sampler = RicianSampler(env.gains, params, shared_nlos=(mode == "shared"))

    _ENSEMBLE_CTX.clear()
    _ENSEMBLE_CTX.update(
        sampler=sampler,
        los_weights=los_alloc.weights,
        seed_base=seed_base,
        tol=tol,
    )
    indices = range(n_realizations)
    if n_jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_fading_worker, indices, chunksize=4))
    else:
        results = [_fading_worker(i) for i in indices]
    results.sort(key=lambda r: r[0])

    los_powers = np.array([r[1] for r in results])
    reopt_powers = np.array([r[2] for r in results])
    counts = np.array([r[3] for r in results], dtype=float)
    n_cells = len(env.tx_grid)

    ratios = los_powers / reopt_powers
    return FadingEnsembleReport(
        realizations=n_realizations,
        mean_support_fraction=float(counts.mean() / n_cells * 100.0),
        support_cov=float(counts.std(ddof=1) / counts.mean() * 100.0),
        mean_relative_performance=float(los_powers.mean() / reopt_powers.mean() * 100.0),
        performance_cov=float(ratios.std(ddof=1) / ratios.mean() * 100.0),
        mode=mode,
        seed_base=seed_base,
        lod=layout.lod,
        los_support_fraction=float(los_alloc.support_size / n_cells * 100.0),
        los_objective=env.solution.objective_m,
    )


def emit_heatmap(allocation: PowerAllocation, tx_grid: LatticeGrid, path, meta: dict | None = None):
    """Write a grid-shaped CSV of power percentages plus a metadata sidecar.

    Rows follow the a_z index, columns the a_x index; cells hold the percent
    of total power at that lattice position.
    """
    xs = np.unique(np.round(tx_grid.x, 9))
    zs = np.unique(np.round(tx_grid.z, 9))
    if len(xs) * len(zs) != len(tx_grid):
        raise ValueError("transmit grid is not a full Cartesian lattice")
    percent = 100.0 * allocation.weights.reshape(len(xs), len(zs)).T
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in percent:
            writer.writerow([_fmt(v) for v in row])
    sidecar = os.fspath(path)
    sidecar = sidecar[: -len(".csv")] if sidecar.endswith(".csv") else sidecar
    with open(sidecar + ".meta.yaml", "w") as fh:
        yaml.safe_dump(meta or {}, fh, sort_keys=True)
    return path


def validate_critical_plane(
    room: RoomGeometry,
    layout: ArrayLayout,
    allocation: PowerAllocation,
    n_levels: int = 5,
    d_fresnel: float = 0.0,
) -> dict:
    """Compare the volume-stack minimum against the floor-plane minimum.

    The gain is monotonically decreasing in depth, so for any allocation the
    minimum over a receiver stack whose deepest level is the floor equals the
    floor-plane minimum; returns both for assertion by callers.
    """
    tx_grid = build_tx_grid(layout, room)
    floor = build_rx_grid(room, layout.lod, "critical_plane")
    stack = build_rx_grid(room, layout.lod, "volume", d_fresnel=d_fresnel, n_levels=n_levels)
    floor_min = float((gain_matrix(tx_grid, floor).entries @ allocation.weights).min())
    level_minima = [
        float((gain_matrix(tx_grid, grid).entries @ allocation.weights).min())
        for grid in stack
    ]
    return {
        "floor_min": floor_min,
        "volume_min": min(level_minima),
        "level_minima": level_minima,
        "level_depths": [grid.plane_y for grid in stack],
    }
