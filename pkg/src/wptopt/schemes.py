"""Benchmark allocation schemes and physical received-power evaluation.

Schemes: m_opt (max-min optimal), m_ff (far-field design: everything on the
center element), m_uni (uniform over the lattice), m_s75 (optimal allocation
pruned at the 75th percentile of its nonzero weights).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

from .channel import GainMatrix, PhysicalParams
from .geometry import LatticeGrid
from .solver import PowerAllocation

SCHEME_IDS = ("m_opt", "m_ff", "m_uni", "m_s75")


@dataclass(frozen=True)
class SchemeResult:
    scheme_id: str
    allocation: PowerAllocation
    min_power_watts: float
    loss_vs_opt: float

    def __post_init__(self):
        if self.scheme_id not in SCHEME_IDS:
            raise ValueError(f"unknown scheme {self.scheme_id!r}")


def scheme_far_field(tx_grid: LatticeGrid) -> PowerAllocation:
    """All power on the lattice point nearest the array center (0, 0)."""
    if len(tx_grid) == 0:
        raise ValueError("empty transmit grid")
    d2 = tx_grid.x**2 + tx_grid.z**2
    w = np.zeros(len(tx_grid))
    w[int(np.argmin(d2))] = 1.0  # argmin breaks ties at the lowest index
    return PowerAllocation(w)


def scheme_uniform(tx_grid: LatticeGrid) -> PowerAllocation:
    """Equal power on every lattice point."""
    if len(tx_grid) == 0:
        raise ValueError("empty transmit grid")
    return PowerAllocation(np.full(len(tx_grid), 1.0 / len(tx_grid)))


def scheme_percentile_prune(opt: PowerAllocation, percentile: float = 75.0) -> PowerAllocation:
    """Remove antennas below the nearest-rank percentile of nonzero weights.

    The nearest-rank percentile value itself always survives, so the pruned
    allocation is never empty; survivors are renormalized to unit sum.
    """
    if not 0 < percentile <= 100:
        raise ValueError("percentile must be in (0, 100]")
    nz = opt.weights[opt.weights > 0]
    if len(nz) == 0:
        raise ValueError("allocation has empty support")
    ranked = np.sort(nz)
    cutoff = ranked[ceil(percentile / 100.0 * len(ranked)) - 1]
    w = opt.weights.copy()
    removed = w < cutoff
    mass = float(w[removed].sum())
    w[removed] = 0.0
    w /= w.sum()
    return PowerAllocation(w, threshold_applied=float(cutoff), removed_mass=mass)


def evaluate_min_power(
    allocation: PowerAllocation, gains: GainMatrix, params: PhysicalParams
) -> float:
    """Worst-case received power in watts for an allocation.

    total_tx_power * gain_calibration * min over receivers of the allocated
    normalized gain; gain_calibration = c * S_RX, (lambda/(4*pi))^2 by default.
    """
    entries = gains.entries if isinstance(gains, GainMatrix) else np.asarray(gains, float)
    if entries.shape[1] != len(allocation.weights):
        raise ValueError("allocation length does not match the transmit grid")
    worst = float((entries @ allocation.weights).min())
    return params.total_tx_power * params.gain_calibration * worst


def loss_ratio(scheme_power: float, opt_power: float) -> float:
    """Scheme worst-case power relative to the optimal scheme's."""
    if opt_power <= 0:
        raise ValueError("optimal power must be strictly positive")
    return scheme_power / opt_power
