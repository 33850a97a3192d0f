"""Worst-case-optimal transmit antenna deployment and power allocation for
indoor wireless power transfer over radiating near-field channels."""

from .certificate import (
    OptimalityCertificate,
    StructureReport,
    check_structure,
    duals_for_allocation,
    solution_for_allocation,
    verify_optimality,
    weighted_average_gain,
)
from .channel import (
    CorrelationMatrix,
    FadingRealization,
    GainMatrix,
    PhysicalParams,
    RicianSampler,
    correlation_matrix,
    gain_matrix,
    los_gain,
    los_phasor_matrix,
    mean_pair_distance,
    sample_rician_gains,
)
from .geometry import (
    ArrayLayout,
    LatticeGrid,
    NearFieldBounds,
    RoomGeometry,
    build_rx_grid,
    build_tx_grid,
    near_field_bounds,
)
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
    SolverError,
    cutting_plane_oracle,
    extract_support,
    solve_maxmin,
    solve_symmetric_reduced,
)
from . import experiments

__version__ = "0.1.0"
