# src/rombif_mcp/operators.py
"""Sparse finite-volume operators on the staggered grid.

The same matrices define the full-order equations and, through Galerkin
projection, the reduced operators.
"""

from functools import lru_cache
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import GeometryError
from .geometry import Grid


def _split(grid: Grid, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    u = x[: grid.n_u].reshape(grid.nx + 1, grid.ny)
    v = x[grid.n_u:].reshape(grid.nx, grid.ny + 1)
    return u, v


@lru_cache(maxsize=16)
def viscous_matrix(grid: Grid) -> sp.csr_matrix:
    """Symmetric energy form K with x^T K x = integral of |grad x|^2."""
    rows, cols, vals, omega = _kernels.gradient_triplets(
        grid.u_kind, grid.v_kind, grid.fluid, grid.dx, grid.dy
    )
    g = sp.csr_matrix((vals, (rows, cols)), shape=(omega.size, grid.size))
    k = (g.T @ sp.diags(omega) @ g).tocsr()
    return k


@lru_cache(maxsize=16)
def divergence_matrix(grid: Grid) -> sp.csr_matrix:
    """Integrated divergence, one row per fluid cell."""
    rows, cols, vals, n_cells = _kernels.divergence_triplets(grid.fluid, grid.dx, grid.dy)
    return sp.csr_matrix((vals, (rows, cols)), shape=(int(n_cells), grid.size))


def convection_matrix(grid: Grid, w: np.ndarray, theta: float = 1.0) -> sp.csr_matrix:
    """C(w): conservative convection of a field by the mass fluxes of ``w``.

    ``theta`` = 1 is the central scheme, bilinear in (w, x); smaller values
    blend in first-order upwinding.
    """
    wu, wv = _split(grid, np.asarray(w, dtype=float))
    rows, cols, vals = _kernels.convection_triplets(
        grid.u_kind, grid.v_kind, grid.dx, grid.dy,
        np.ascontiguousarray(wu), np.ascontiguousarray(wv), float(theta),
    )
    return sp.csr_matrix((vals, (rows, cols)), shape=(grid.size, grid.size))


def mirror_matrix(grid: Grid) -> sp.csr_matrix:
    n = grid.size
    return sp.csr_matrix((grid.mirror_sign, (np.arange(n), grid.mirror_index)), shape=(n, n))


def weighted_norm(grid: Grid, x: np.ndarray) -> float:
    return float(np.sqrt(np.dot(grid.l2_weights * x, x)))


def probe_matrix(grid: Grid, x: float, y: float) -> np.ndarray:
    """Dense (2, size) map from a state vector to bilinear (u, v) at a point."""
    if not (0.0 <= x <= grid.length) or abs(y) > 0.5 * grid.height:
        raise GeometryError(f"Probe ({x}, {y}) lies outside the domain")
    out = np.zeros((2, grid.size))
    lattices = [
        (grid.x_faces, grid.yc, grid.ny, 0),
        (grid.xc, grid.y_faces, grid.ny + 1, grid.n_u),
    ]
    for comp, (xs, ys, stride, offset) in enumerate(lattices):
        px = float(np.clip(x, xs[0], xs[-1]))
        py = float(np.clip(y, ys[0], ys[-1]))
        i = int(np.clip(np.searchsorted(xs, px) - 1, 0, xs.size - 2))
        j = int(np.clip(np.searchsorted(ys, py) - 1, 0, ys.size - 2))
        tx = (px - xs[i]) / (xs[i + 1] - xs[i])
        ty = (py - ys[j]) / (ys[j + 1] - ys[j])
        for di, wx in ((0, 1.0 - tx), (1, tx)):
            for dj, wy in ((0, 1.0 - ty), (1, ty)):
                out[comp, offset + (i + di) * stride + (j + dj)] += wx * wy
    return out
