"""Room model, transmit/receiver lattices, and near-field boundary diagnostics.

Coordinate convention: the origin sits in the middle of the ceiling, the x/z
axes span the ceiling plane, and y points down into the room, so the ceiling
is y = 0 and the floor is y = len_y.  Transmit lattices live in the ceiling
plane; receiver lattices are horizontal planes at a given depth y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_COORD_TOL = 1e-9


@dataclass(frozen=True)
class RoomGeometry:
    """Cuboid room: len_x (width), len_y (height), len_z (depth), in meters."""

    len_x: float
    len_y: float
    len_z: float

    def __post_init__(self):
        for name in ("len_x", "len_y", "len_z"):
            if not getattr(self, name) > 0:
                raise ValueError(f"room dimension {name} must be strictly positive")

    @property
    def diagonal(self) -> float:
        return float(np.sqrt(self.len_x**2 + self.len_y**2 + self.len_z**2))


@dataclass(frozen=True)
class ArrayLayout:
    """Ceiling array footprint and per-axis sample count.

    ``lod`` is the number of lattice points per axis (endpoint inclusive).
    ``one_d`` arrays run along the x axis at z = 0.
    """

    dimensionality: str
    extent_x: float
    extent_z: float
    lod: int

    def __post_init__(self):
        if self.dimensionality not in ("one_d", "two_d"):
            raise ValueError(f"unknown dimensionality {self.dimensionality!r}")
        if self.lod < 1:
            raise ValueError("lod must be a positive integer")
        if self.extent_x <= 0 or self.extent_z < 0:
            raise ValueError("array extents must be positive")

    def validate_for(self, room: RoomGeometry) -> None:
        if self.extent_x > room.len_x + _COORD_TOL:
            raise ValueError("array extent_x exceeds room len_x")
        if self.extent_z > room.len_z + _COORD_TOL:
            raise ValueError("array extent_z exceeds room len_z")


@dataclass(frozen=True)
class LatticeGrid:
    """Ordered lattice points (x, z) in a horizontal plane at depth plane_y."""

    x: np.ndarray
    z: np.ndarray
    plane_y: float
    spacing: float
    mirror_x: bool = True
    mirror_z: bool = True

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "z", np.atleast_1d(np.asarray(self.z, dtype=float)))
        if self.x.shape != self.z.shape or self.x.ndim != 1:
            raise ValueError("x and z must be 1-D arrays of equal length")
        if len(self.x) == 0:
            raise ValueError("empty lattice")

    def __len__(self) -> int:
        return len(self.x)

    @property
    def positions(self) -> np.ndarray:
        """(N, 2) array of (x, z) pairs in grid order."""
        return np.column_stack([self.x, self.z])

    def index_of(self, x: float, z: float) -> int:
        """Index of the lattice point at (x, z); raises if absent."""
        hit = np.flatnonzero(
            (np.abs(self.x - x) < _COORD_TOL) & (np.abs(self.z - z) < _COORD_TOL)
        )
        if len(hit) != 1:
            raise KeyError(f"position ({x}, {z}) not on the lattice")
        return int(hit[0])

    def mirror_index_map(self, sign_x: int, sign_z: int) -> np.ndarray:
        """Permutation sending each point to its (sign_x*x, sign_z*z) mirror."""
        order = np.lexsort((self.z, self.x))
        mirrored = np.lexsort((sign_z * self.z, sign_x * self.x))
        perm = np.empty(len(self.x), dtype=int)
        perm[order] = mirrored
        mx, mz = self.x[perm], self.z[perm]
        if not (
            np.allclose(mx, sign_x * self.x, atol=_COORD_TOL)
            and np.allclose(mz, sign_z * self.z, atol=_COORD_TOL)
        ):
            raise ValueError("point set is not closed under the requested mirror")
        return perm


@dataclass(frozen=True)
class NearFieldBounds:
    """Fraunhofer (far-field onset) and Fresnel (reactive boundary) distances."""

    d_fraunhofer: float
    d_fresnel: float


def _axis_points(extent: float, lod: int) -> np.ndarray:
    if lod == 1:
        return np.zeros(1)
    return np.linspace(-extent / 2.0, extent / 2.0, lod)


def build_tx_grid(layout: ArrayLayout, room: RoomGeometry) -> LatticeGrid:
    """Transmit lattice in the ceiling plane (y = 0).

    ``two_d`` yields the lod x lod Cartesian product over the array footprint,
    endpoint inclusive, with spacing extent/(lod-1); ``one_d`` yields lod
    points along x at z = 0.
    """
    layout.validate_for(room)
    ax = _axis_points(layout.extent_x, layout.lod)
    spacing = layout.extent_x / (layout.lod - 1) if layout.lod >= 2 else 0.0
    if layout.dimensionality == "two_d":
        az = _axis_points(layout.extent_z, layout.lod)
        gx, gz = np.meshgrid(ax, az, indexing="ij")
        return LatticeGrid(gx.ravel(), gz.ravel(), plane_y=0.0, spacing=spacing)
    return LatticeGrid(ax, np.zeros_like(ax), plane_y=0.0, spacing=spacing)


def build_rx_grid(
    room: RoomGeometry,
    lod: int,
    mode: str = "critical_plane",
    d_fresnel: float = 0.0,
    n_levels: int = 5,
):
    """Receiver lattice(s) spanning the full room cross-section.

    ``critical_plane`` returns the floor-plane grid at y = len_y, where the
    worst-case received power is attained for any allocation.  ``volume``
    returns a stack of ``n_levels`` grids at geometrically spaced depths from
    max(d_fresnel, 0.1*len_y) down to the floor (floor included), used to
    validate that the floor plane is indeed critical.
    """
    if lod < 1:
        raise ValueError("lod must be a positive integer")
    ax = _axis_points(room.len_x, lod)
    az = _axis_points(room.len_z, lod)
    spacing = room.len_x / (lod - 1) if lod >= 2 else 0.0
    gx, gz = np.meshgrid(ax, az, indexing="ij")
    if mode == "critical_plane":
        return LatticeGrid(gx.ravel(), gz.ravel(), plane_y=room.len_y, spacing=spacing)
    if mode == "volume":
        y_top = max(d_fresnel, 0.1 * room.len_y)
        if not y_top < room.len_y:
            raise ValueError("reactive near-field boundary reaches the floor")
        levels = np.geomspace(y_top, room.len_y, n_levels)
        return [
            LatticeGrid(gx.ravel(), gz.ravel(), plane_y=float(y), spacing=spacing)
            for y in levels
        ]
    raise ValueError(f"unknown receiver grid mode {mode!r}")


def near_field_bounds(
    aperture: float, element_size: float, wavelength: float
) -> NearFieldBounds:
    """Fraunhofer distance 2*L^2/lambda and reactive-boundary distance
    (L_element^4 / (8*lambda))^(1/3)."""
    if aperture <= 0 or element_size <= 0 or wavelength <= 0:
        raise ValueError("aperture, element_size, and wavelength must be positive")
    d_fraunhofer = 2.0 * aperture**2 / wavelength
    d_fresnel = float(np.cbrt(element_size**4 / (8.0 * wavelength)))
    return NearFieldBounds(d_fraunhofer=d_fraunhofer, d_fresnel=d_fresnel)
