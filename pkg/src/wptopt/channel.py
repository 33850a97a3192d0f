"""Line-of-sight channel gains, spatial correlation, and Rician fading draws.

All gains are handled in normalized form: the reference channel power gain c
cancels in every optimization and loss ratio, so the LoS gain of a
transmitter/receiver pair is simply 1/D^2, and complex LoS channels are
represented as g/sqrt(c) = exp(-j*2*pi*D/lambda)/D.  Physical wattage is
recovered through PhysicalParams.gain_calibration (= c * S_RX).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import LatticeGrid


@dataclass(frozen=True)
class PhysicalParams:
    """Radio parameters; defaults follow the evaluation setup used throughout.

    gain_calibration is the product c*S_RX mapping the normalized max-min
    objective (units 1/m^2) to received watts; (lambda/(4*pi))^2 reproduces
    the reference minimum-power curves (see schemes module).
    """

    total_tx_power: float = 10.0
    wavelength: float = 0.0125
    rx_aperture: float = 0.0125**2 / 4.0
    gain_calibration: float = (0.0125 / (4.0 * np.pi)) ** 2
    element_area: float = (0.0125 / 2.0) ** 2
    rician_k: float = 10.0
    avg_distance_policy: str = "grid_mean"

    def __post_init__(self):
        if self.total_tx_power <= 0 or self.wavelength <= 0:
            raise ValueError("total_tx_power and wavelength must be positive")
        if self.rx_aperture <= 0 or self.gain_calibration <= 0 or self.element_area <= 0:
            raise ValueError("apertures and calibration must be positive")
        if self.rician_k < 0:
            raise ValueError("rician_k must be nonnegative")
        if self.avg_distance_policy != "grid_mean":
            raise ValueError(f"unknown avg_distance_policy {self.avg_distance_policy!r}")

    @classmethod
    def with_wavelength(cls, wavelength: float, **kwargs) -> "PhysicalParams":
        """Defaults re-derived for a different wavelength."""
        kwargs.setdefault("rx_aperture", wavelength**2 / 4.0)
        kwargs.setdefault("gain_calibration", (wavelength / (4.0 * np.pi)) ** 2)
        kwargs.setdefault("element_area", (wavelength / 2.0) ** 2)
        return cls(wavelength=wavelength, **kwargs)


@dataclass(frozen=True)
class GainMatrix:
    """Receiver-major matrix of normalized squared channel magnitudes (1/m^2)."""

    entries: np.ndarray
    rx_grid: LatticeGrid
    tx_grid: LatticeGrid

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", e)
        if e.shape != (len(self.rx_grid), len(self.tx_grid)):
            raise ValueError("gain matrix shape does not match the grids")
        if not np.all(np.isfinite(e)) or e.min() < 0:
            raise ValueError("gains must be finite and nonnegative")

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric sinc spatial correlation over transmit positions."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", e)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError("correlation matrix must be square")


@dataclass(frozen=True)
class FadingRealization:
    """One Rician draw: normalized faded gains |g_tilde|^2 / c."""

    faded_gains: GainMatrix
    seed: int
    shared_nlos: bool


def _pairwise_sq_dist(tx_grid: LatticeGrid, rx_grid: LatticeGrid) -> np.ndarray:
    dy = rx_grid.plane_y - tx_grid.plane_y
    return (
        (rx_grid.x[:, None] - tx_grid.x[None, :]) ** 2
        + dy**2
        + (rx_grid.z[:, None] - tx_grid.z[None, :]) ** 2
    )


def los_gain(tx: tuple, rx: tuple) -> float:
    """Normalized LoS power gain 1/D^2 of a ceiling element at (a_x, a_z) seen
    from a receiver at (x, y, z); requires y > 0."""
    a_x, a_z = tx
    x, y, z = rx
    if y <= 0:
        raise ValueError("receiver height must be strictly positive")
    return 1.0 / ((x - a_x) ** 2 + y**2 + (z - a_z) ** 2)


def gain_matrix(tx_grid: LatticeGrid, rx_grid: LatticeGrid) -> GainMatrix:
    """Dense gain matrix, entry (r, t) = los_gain(tx t, rx r)."""
    if len(tx_grid) == 0 or len(rx_grid) == 0:
        raise ValueError("grids must be nonempty")
    if rx_grid.plane_y - tx_grid.plane_y <= 0:
        raise ValueError("receiver plane must lie strictly below the array plane")
    return GainMatrix(1.0 / _pairwise_sq_dist(tx_grid, rx_grid), rx_grid, tx_grid)


def correlation_matrix(tx_grid: LatticeGrid, wavelength: float) -> CorrelationMatrix:
    """Isotropic-scattering correlation R_ij = sinc(2*d_ij/lambda)."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    d = np.sqrt(
        (tx_grid.x[:, None] - tx_grid.x[None, :]) ** 2
        + (tx_grid.z[:, None] - tx_grid.z[None, :]) ** 2
    )
    return CorrelationMatrix(np.sinc(2.0 * d / wavelength))


def los_phasor_matrix(tx_grid: LatticeGrid, rx_grid: LatticeGrid, wavelength: float) -> np.ndarray:
    """Normalized complex LoS channels g/sqrt(c) = exp(-j*2*pi*D/lambda)/D."""
    d = np.sqrt(_pairwise_sq_dist(tx_grid, rx_grid))
    return np.exp(-2j * np.pi * d / wavelength) / d


def mean_pair_distance(tx_grid: LatticeGrid, rx_grid: LatticeGrid) -> float:
    """Average Euclidean distance over all (tx, rx) lattice pairs."""
    return float(np.sqrt(_pairwise_sq_dist(tx_grid, rx_grid)).mean())


def _realization_rng(seed: int, index: int | None = None) -> np.random.Generator:
    # Philox is counter-based: realizations keyed by (seed, index) are
    # reproducible independently of evaluation order.
    spawn_key = () if index is None else (index,)
    seq = np.random.SeedSequence(entropy=seed, spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(seq))


class RicianSampler:
    """Draws correlated Rician fading gain matrices for a fixed geometry.

    Precomputes the LoS phasors, the average pair distance, and the
    eigendecomposition-based factor of the (rank-deficient) sinc correlation
    matrix, so individual realizations are cheap.
    """

    def __init__(self, base: GainMatrix, params: PhysicalParams, shared_nlos: bool = True):
        self.base = base
        self.params = params
        self.shared_nlos = shared_nlos
        self.phasors = los_phasor_matrix(base.tx_grid, base.rx_grid, params.wavelength)
        self.avg_distance = mean_pair_distance(base.tx_grid, base.rx_grid)
        corr = correlation_matrix(base.tx_grid, params.wavelength).entries
        evals, evecs = np.linalg.eigh(corr)
        # the sinc matrix is numerically singular: clip small/negative modes
        evals[evals < 1e-10 * evals.max()] = 0.0
        self._factor = evecs * np.sqrt(evals)
        self.nlos_std = float(np.sqrt(params.element_area) / self.avg_distance)

    def sample(self, seed: int, index: int | None = None) -> FadingRealization:
        kappa = self.params.rician_k
        if np.isinf(kappa):
            faded = self.base.entries.copy()
        else:
            rng = _realization_rng(seed, index)
            a = np.sqrt(kappa / (kappa + 1.0))
            b = np.sqrt(1.0 / (kappa + 1.0))
            n_tx = len(self.base.tx_grid)
            n_rx = len(self.base.rx_grid)
            if self.shared_nlos:
                w = (rng.standard_normal(n_tx) + 1j * rng.standard_normal(n_tx)) / np.sqrt(2.0)
                h = self.nlos_std * (self._factor @ w)
                faded = np.abs(a * self.phasors + b * h[None, :]) ** 2
            else:
                w = (
                    rng.standard_normal((n_tx, n_rx))
                    + 1j * rng.standard_normal((n_tx, n_rx))
                ) / np.sqrt(2.0)
                h = self.nlos_std * (self._factor @ w)
                faded = np.abs(a * self.phasors + b * h.T) ** 2
        gm = GainMatrix(faded, self.base.rx_grid, self.base.tx_grid)
        return FadingRealization(faded_gains=gm, seed=seed, shared_nlos=self.shared_nlos)


def sample_rician_gains(
    base: GainMatrix,
    params: PhysicalParams,
    seed: int,
    shared_nlos: bool = True,
) -> FadingRealization:
    """One-shot Rician draw; for ensembles build a RicianSampler once instead."""
    return RicianSampler(base, params, shared_nlos=shared_nlos).sample(seed)
