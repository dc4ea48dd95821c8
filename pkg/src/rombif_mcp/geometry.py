# src/rombif_mcp/geometry.py
"""Contraction-expansion channel geometry, grid and parameter types."""

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from functools import cached_property
from typing import Any, Dict, Optional

import numpy as np

from .errors import GeometryError, GridResolutionError

MIN_SLOT_CELLS = 8
DOWNSTREAM_FACTOR = 6.0


class GeometryMode(str, Enum):
    FULL_CHANNEL = "FullChannel"
    EXPANSION_ONLY = "ExpansionOnly"


class FaceKind(IntEnum):
    """Classification of every velocity face of the staggered grid."""

    EXTERIOR = 0
    INTERIOR = 1
    INLET = 2
    WALL = 3
    OUTLET = 4


@dataclass(frozen=True)
class ParameterPoint:
    """One (Re, lambda) location in parameter space."""

    re: float
    lam: float

    def __post_init__(self):
        if not np.isfinite(self.re) or self.re <= 0:
            raise GeometryError(f"Reynolds number must be positive, got {self.re}")
        if not np.isfinite(self.lam) or self.lam < 1:
            raise GeometryError(f"Expansion ratio must be >= 1, got {self.lam}")

    def as_dict(self) -> Dict[str, float]:
        return {"re": float(self.re), "lambda": float(self.lam)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ParameterPoint":
        return cls(re=float(data["re"]), lam=float(data["lambda"]))


def viscosity_for(
    p: ParameterPoint, mean_velocity: float = 1.0, channel_height: float = 1.0
) -> float:
    """nu = 2 <v_x> w_c / Re, with w_c = L_c / lambda."""
    width = channel_height / p.lam
    return 2.0 * mean_velocity * width / p.re


def reynolds_for(
    nu: float, lam: float, mean_velocity: float = 1.0, channel_height: float = 1.0
) -> float:
    if nu <= 0:
        raise GeometryError(f"Viscosity must be positive, got {nu}")
    width = channel_height / lam
    return 2.0 * mean_velocity * width / nu


@dataclass(frozen=True)
class ChannelGeometry:
    """Lengths of the 2D contraction-expansion channel."""

    channel_height: float
    contraction_width: float
    upstream_length: float
    contraction_length: float
    downstream_length: float
    mode: GeometryMode
    lam: float

    @property
    def total_length(self) -> float:
        return self.upstream_length + self.contraction_length + self.downstream_length

    @property
    def expansion_x(self) -> float:
        """Streamwise position of the sudden expansion."""
        return self.upstream_length + self.contraction_length

    def as_dict(self) -> Dict[str, Any]:
        return {
            "channel_height": self.channel_height,
            "contraction_width": self.contraction_width,
            "upstream_length": self.upstream_length,
            "contraction_length": self.contraction_length,
            "downstream_length": self.downstream_length,
            "mode": self.mode.value,
            "lambda": self.lam,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ChannelGeometry":
        return build_geometry(
            float(data["lambda"]), float(data["channel_height"]), GeometryMode(data["mode"])
        )


def build_geometry(
    lam: float,
    channel_height: float = 1.0,
    mode: GeometryMode = GeometryMode.FULL_CHANNEL,
) -> ChannelGeometry:
    """Derive the channel lengths for expansion ratio ``lam``."""
    if not np.isfinite(lam) or lam < 1:
        raise GeometryError(f"Expansion ratio must be >= 1, got {lam}")
    if not np.isfinite(channel_height) or channel_height <= 0:
        raise GeometryError(f"Channel height must be positive, got {channel_height}")
    mode = GeometryMode(mode)
    width = channel_height / lam
    if mode == GeometryMode.FULL_CHANNEL:
        upstream = channel_height
        contraction = (channel_height - width) / 2.0
    else:
        upstream = 0.0
        contraction = 0.0
    return ChannelGeometry(
        channel_height=channel_height,
        contraction_width=width,
        upstream_length=upstream,
        contraction_length=contraction,
        downstream_length=DOWNSTREAM_FACTOR * channel_height,
        mode=mode,
        lam=float(lam),
    )


def _nearest_odd(value: float) -> int:
    return int(2 * np.floor((value - 1.0) / 2.0 + 0.5) + 1)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform staggered (MAC) grid over the channel.

    u lives on vertical faces, shape (nx+1, ny); v on horizontal faces,
    shape (nx, ny+1). The flattened state vector stores u then v, row-major.
    """

    geometry: ChannelGeometry
    resolution: float
    streamwise_resolution: float
    nx: int
    ny: int
    dx: float
    dy: float
    x_faces: np.ndarray
    y_faces: np.ndarray
    fluid: np.ndarray
    u_kind: np.ndarray
    v_kind: np.ndarray
    slot_cells: int
    inlet_rows: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def xc(self) -> np.ndarray:
        return 0.5 * (self.x_faces[:-1] + self.x_faces[1:])

    @property
    def yc(self) -> np.ndarray:
        return 0.5 * (self.y_faces[:-1] + self.y_faces[1:])

    @property
    def n_u(self) -> int:
        return (self.nx + 1) * self.ny

    @property
    def n_v(self) -> int:
        return self.nx * (self.ny + 1)

    @property
    def size(self) -> int:
        return self.n_u + self.n_v

    @property
    def length(self) -> float:
        return self.nx * self.dx

    @property
    def height(self) -> float:
        return self.ny * self.dy

    @cached_property
    def l2_weights(self) -> np.ndarray:
        """Face weights of the discrete L2 product (half cells at inlet and outlet)."""
        f = self.fluid.astype(float)
        cell = self.dx * self.dy
        wu = np.zeros((self.nx + 1, self.ny))
        wu[:-1, :] += 0.5 * cell * f
        wu[1:, :] += 0.5 * cell * f
        wv = np.zeros((self.nx, self.ny + 1))
        wv[:, :-1] += 0.5 * cell * f
        wv[:, 1:] += 0.5 * cell * f
        return np.concatenate([wu.ravel(), wv.ravel()])

    @cached_property
    def u_mask(self) -> np.ndarray:
        """Flattened indicator of the u entries of the state vector."""
        mask = np.zeros(self.size, dtype=bool)
        mask[: self.n_u] = True
        return mask

    @cached_property
    def free_mask(self) -> np.ndarray:
        u_free = np.isin(self.u_kind, (FaceKind.INTERIOR, FaceKind.OUTLET))
        v_free = self.v_kind == FaceKind.INTERIOR
        return np.concatenate([u_free.ravel(), v_free.ravel()])

    @cached_property
    def inlet_indices(self) -> np.ndarray:
        """State-vector indices of the left-edge u faces (row order)."""
        return np.arange(self.ny)

    @cached_property
    def mirror_index(self) -> np.ndarray:
        iu = np.arange(self.n_u).reshape(self.nx + 1, self.ny)[:, ::-1].ravel()
        iv = (self.n_u + np.arange(self.n_v)).reshape(self.nx, self.ny + 1)[:, ::-1].ravel()
        return np.concatenate([iu, iv])

    @cached_property
    def mirror_sign(self) -> np.ndarray:
        return np.concatenate([np.ones(self.n_u), -np.ones(self.n_v)])

    def mirror_vector(self, x: np.ndarray) -> np.ndarray:
        """Reflect about y = 0 and negate v."""
        return self.mirror_sign * x[self.mirror_index]

    def compatible(self, other: "Grid") -> bool:
        """Same shape, spacing and fluid region (inlet placement may differ)."""
        if other is self:
            return True
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and np.isclose(self.dx, other.dx, rtol=1e-12)
            and np.isclose(self.dy, other.dy, rtol=1e-12)
            and np.array_equal(self.fluid, other.fluid)
        )

    def is_mirror_symmetric(self) -> bool:
        return (
            np.array_equal(self.fluid, self.fluid[:, ::-1])
            and np.array_equal(self.u_kind, self.u_kind[:, ::-1])
            and np.array_equal(self.v_kind, self.v_kind[:, ::-1])
        )

    def spec(self) -> Dict[str, Any]:
        return {
            "geometry": self.geometry.as_dict(),
            "resolution": self.resolution,
            "streamwise_resolution": self.streamwise_resolution,
        }


def build_grid(
    geom: ChannelGeometry,
    resolution: float,
    streamwise_resolution: Optional[float] = None,
) -> Grid:
    """Discretize ``geom`` with ``resolution`` cells per unit length.

    The slot width is rounded to an odd number of cells so the grid stays
    exactly mirror-symmetric about y = 0.
    """
    if resolution <= 0:
        raise GridResolutionError(f"Resolution must be positive, got {resolution}")
    sx = float(streamwise_resolution or resolution)
    height = geom.channel_height
    ny = max(1, _nearest_odd(height * resolution))
    dy = height / ny
    cells_across = geom.contraction_width / dy
    if cells_across < MIN_SLOT_CELLS - 1e-9:
        raise GridResolutionError(
            f"Only {cells_across:.2f} cells across the contraction width "
            f"(need at least {MIN_SLOT_CELLS}); increase the resolution"
        )
    slot_cells = min(ny, _nearest_odd(cells_across))

    length = geom.total_length
    nx = max(2, int(round(length * sx)))
    dx = length / nx
    x_faces = np.linspace(0.0, length, nx + 1)
    y_faces = np.linspace(-0.5 * height, 0.5 * height, ny + 1)
    xc = 0.5 * (x_faces[:-1] + x_faces[1:])

    centre = (ny - 1) // 2
    half = (slot_cells - 1) // 2
    slot = np.zeros(ny, dtype=bool)
    slot[centre - half: centre + half + 1] = True

    fluid = np.ones((nx, ny), dtype=bool)
    if geom.contraction_length > 0:
        x0 = geom.upstream_length
        x1 = geom.expansion_x
        in_contraction = (xc >= x0) & (xc <= x1)
        fluid[np.ix_(in_contraction, ~slot)] = False

    if geom.mode == GeometryMode.FULL_CHANNEL:
        inlet_rows = fluid[0, :].copy()
    else:
        inlet_rows = slot.copy()

    u_kind = np.full((nx + 1, ny), FaceKind.EXTERIOR, dtype=np.int8)
    left = np.zeros((nx + 1, ny), dtype=bool)
    right = np.zeros((nx + 1, ny), dtype=bool)
    left[1:, :] = fluid
    right[:-1, :] = fluid
    u_kind[left & right] = FaceKind.INTERIOR
    u_kind[left ^ right] = FaceKind.WALL
    edge = fluid[0, :]
    u_kind[0, edge & inlet_rows] = FaceKind.INLET
    u_kind[0, edge & ~inlet_rows] = FaceKind.WALL
    u_kind[nx, fluid[-1, :]] = FaceKind.OUTLET

    v_kind = np.full((nx, ny + 1), FaceKind.EXTERIOR, dtype=np.int8)
    below = np.zeros((nx, ny + 1), dtype=bool)
    above = np.zeros((nx, ny + 1), dtype=bool)
    below[:, 1:] = fluid
    above[:, :-1] = fluid
    v_kind[below & above] = FaceKind.INTERIOR
    v_kind[below ^ above] = FaceKind.WALL

    metadata = {
        "slot_cells": slot_cells,
        "quantized_width": slot_cells * dy,
        "inlet_width": int(inlet_rows.sum()) * dy,
        "cells_across_width": cells_across,
    }
    return Grid(
        geometry=geom,
        resolution=float(resolution),
        streamwise_resolution=sx,
        nx=nx,
        ny=ny,
        dx=dx,
        dy=dy,
        x_faces=x_faces,
        y_faces=y_faces,
        fluid=fluid,
        u_kind=u_kind,
        v_kind=v_kind,
        slot_cells=slot_cells,
        inlet_rows=inlet_rows,
        metadata=metadata,
    )


def inlet_profile(grid: Grid, mean_velocity: float = 1.0) -> np.ndarray:
    """Parabolic inlet x-velocity along the left edge, one value per row.

    The discrete flux through the inlet equals ``mean_velocity * w_c``.
    """
    geom = grid.geometry
    rows = grid.inlet_rows
    yc = grid.yc
    half = 0.5 * rows.sum() * grid.dy
    profile = np.zeros(grid.ny)
    profile[rows] = 1.0 - (yc[rows] / half) ** 2
    flux = profile.sum() * grid.dy
    return profile * (mean_velocity * geom.contraction_width / flux)
