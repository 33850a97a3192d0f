"""Numerical optimality certificates for candidate allocations.

A unit-sum receiver weighting lambda induces the dual-averaged gain
fbar(t) = sum_r lambda_r f(r, t) / sum_r lambda_r over the transmit lattice.
An allocation achieving value m is optimal iff fbar <= m everywhere and
fbar = m on its support; evaluating both conditions on the full lattice turns
any solver output into a verifiable certificate, independent of how the
solution was produced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import GainMatrix
from .geometry import LatticeGrid
from .solver import MaxMinSolution, PowerAllocation


@dataclass(frozen=True)
class OptimalityCertificate:
    """Residuals of the optimality conditions, normalized by m."""

    max_fbar_excess: float      # max over all tx of (fbar - m)/m, signed
    support_deviation: float    # max over support of |fbar - m|/m
    slackness_residual: float   # max over rx of lambda_r |row_r . p - m| / m
    symmetry_residual: float    # max |p - p mirrored| when grids are symmetric
    tol_cert: float
    tol_sym: float
    passed: bool


@dataclass(frozen=True)
class StructureReport:
    """Finite-support observables of an allocation at fixed lod."""

    nonzero_count: int
    support_fraction: float     # nonzeros / grid cells
    symmetry_residual: float
    threshold: float


def weighted_average_gain(duals: np.ndarray, gains: GainMatrix) -> np.ndarray:
    """Dual-weighted average of the receiver gain rows, one value per tx."""
    lam = np.asarray(duals, dtype=float)
    entries = gains.entries if isinstance(gains, GainMatrix) else np.asarray(gains, float)
    if lam.shape != (entries.shape[0],):
        raise ValueError("dual vector length must match the receiver count")
    if lam.min() < 0:
        raise ValueError("dual weights must be nonnegative")
    total = lam.sum()
    if total <= 0:
        raise ValueError("dual weights must not all be zero")
    return (lam @ entries) / total


def _weight_symmetry_residual(weights: np.ndarray, grid: LatticeGrid) -> float:
    if not (grid.mirror_x and grid.mirror_z):
        return 0.0
    res = 0.0
    for sx, sz in ((-1, 1), (1, -1), (-1, -1)):
        perm = grid.mirror_index_map(sx, sz)
        res = max(res, float(np.abs(weights - weights[perm]).max()))
    return res


def verify_optimality(
    solution: MaxMinSolution,
    gains: GainMatrix,
    tol_cert: float = 1e-6,
    tol_sym: float = 1e-6,
) -> OptimalityCertificate:
    """Check the dual-averaged-gain optimality conditions for a solution."""
    entries = gains.entries
    p = solution.allocation.weights
    lam = solution.duals
    if entries.shape != (len(lam), len(p)):
        raise ValueError("solution dimensions do not match the gain matrix")
    m = solution.objective_m
    if m <= 0:
        raise ValueError("objective value must be positive")

    fbar = weighted_average_gain(lam, gains)
    excess = float(fbar.max() - m) / m
    support = solution.allocation.support
    deviation = float(np.abs(fbar[support] - m).max()) / m
    received = entries @ p
    slackness = float(np.max(lam * np.abs(received - m))) / m
    symmetry = (
        _weight_symmetry_residual(p, gains.tx_grid)
        if isinstance(gains, GainMatrix)
        else 0.0
    )
    passed = (
        excess <= tol_cert
        and deviation <= tol_cert
        and slackness <= tol_cert
        and symmetry <= tol_sym
    )
    return OptimalityCertificate(
        max_fbar_excess=excess,
        support_deviation=deviation,
        slackness_residual=slackness,
        symmetry_residual=symmetry,
        tol_cert=tol_cert,
        tol_sym=tol_sym,
        passed=passed,
    )


def duals_for_allocation(
    allocation: PowerAllocation, gains: GainMatrix, rtol: float = 1e-9
) -> np.ndarray:
    """Uniform dual weights on the allocation's worst receiver rows.

    For solver outputs the duals come with the solution; this constructs the
    natural candidate duals for externally supplied allocations so that
    verify_optimality yields a meaningful fail/pass diagnostic for them.
    """
    entries = gains.entries if isinstance(gains, GainMatrix) else np.asarray(gains, float)
    received = entries @ allocation.weights
    worst = received <= received.min() * (1.0 + rtol)
    lam = np.zeros(len(received))
    lam[worst] = 1.0 / worst.sum()
    return lam


def solution_for_allocation(
    allocation: PowerAllocation, gains: GainMatrix, rtol: float = 1e-9
) -> MaxMinSolution:
    """Wrap an externally supplied allocation with its induced duals."""
    entries = gains.entries
    received = entries @ allocation.weights
    return MaxMinSolution(
        allocation=allocation,
        objective_m=float(received.min()),
        duals=duals_for_allocation(allocation, gains, rtol),
        solver_stats={"method": "external"},
    )


def check_structure(
    solution: MaxMinSolution,
    tx_grid: LatticeGrid,
    threshold: float = 1e-6,
) -> StructureReport:
    """Report thresholded support size, grid fraction, and mirror symmetry."""
    w = solution.allocation.weights
    count = int(np.count_nonzero(w >= threshold))
    return StructureReport(
        nonzero_count=count,
        support_fraction=count / len(w),
        symmetry_residual=_weight_symmetry_residual(w, tx_grid),
        threshold=threshold,
    )
