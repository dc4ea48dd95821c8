# src/rombif_mcp/_kernels.py
"""Numba stencil kernels for the staggered-grid operators.

Every kernel returns COO triplets over the full state vector (u faces then
v faces, row-major). Face kind codes follow ``geometry.FaceKind``.
"""

import numpy as np
from numba import njit

EXTERIOR = 0
INTERIOR = 1
INLET = 2
WALL = 3
OUTLET = 4


@njit(cache=True, inline="always")
def _uid(u_kind, i, j):
    nx1, ny = u_kind.shape
    if i < 0 or i >= nx1 or j < 0 or j >= ny:
        return -1
    if u_kind[i, j] == EXTERIOR:
        return -1
    return i * ny + j


@njit(cache=True, inline="always")
def _vid(v_kind, i, j, n_u):
    nx, ny1 = v_kind.shape
    if i < 0 or i >= nx or j < 0 or j >= ny1:
        return -1
    if v_kind[i, j] == EXTERIOR:
        return -1
    return n_u + i * ny1 + j


@njit(cache=True, inline="always")
def _flux(rows, cols, vals, k, r, ia, ib, f, sgn, theta):
    # sgn * f * face value; face value blends central and upwind
    if f == 0.0:
        return k
    c = sgn * f
    if theta > 0.0:
        if ia >= 0:
            rows[k] = r
            cols[k] = ia
            vals[k] = 0.5 * theta * c
            k += 1
        if ib >= 0:
            rows[k] = r
            cols[k] = ib
            vals[k] = 0.5 * theta * c
            k += 1
    if theta < 1.0:
        iu = ia if f > 0.0 else ib
        if iu >= 0:
            rows[k] = r
            cols[k] = iu
            vals[k] = (1.0 - theta) * c
            k += 1
    return k


@njit(cache=True)
def convection_triplets(u_kind, v_kind, dx, dy, wu, wv, theta):
    """Conservative convection C(w) on the MAC grid.

    Row r of C(w) x is the net convective flux of x out of the control
    volume of face r, with mass fluxes taken from w. Inlet and outlet u
    faces use half control volumes. Left-edge u faces always get a row.
    """
    nx1, ny = u_kind.shape
    nx = nx1 - 1
    n_u = nx1 * ny
    cap = 12 * (n_u + nx * (ny + 1))
    rows = np.empty(cap, np.int64)
    cols = np.empty(cap, np.int64)
    vals = np.empty(cap)
    k = 0

    for i in range(nx + 1):
        for j in range(ny):
            kind = u_kind[i, j]
            if kind == EXTERIOR:
                continue
            if kind == WALL and i != 0:
                continue
            r = i * ny + j
            me = r
            # east
            if i < nx:
                f = 0.5 * dy * (wu[i, j] + wu[i + 1, j])
                k = _flux(rows, cols, vals, k, r, me, _uid(u_kind, i + 1, j), f, 1.0, theta)
            else:
                f = dy * wu[i, j]
                k = _flux(rows, cols, vals, k, r, me, me, f, 1.0, theta)
            # west
            if i > 0:
                f = 0.5 * dy * (wu[i - 1, j] + wu[i, j])
                k = _flux(rows, cols, vals, k, r, _uid(u_kind, i - 1, j), me, f, -1.0, theta)
            else:
                f = dy * wu[i, j]
                k = _flux(rows, cols, vals, k, r, me, me, f, -1.0, theta)
            # north and south mass fluxes from the neighbouring v faces
            if i == 0:
                fn = 0.5 * dx * wv[0, j + 1]
                fs = 0.5 * dx * wv[0, j]
            elif i == nx:
                fn = 0.5 * dx * wv[nx - 1, j + 1]
                fs = 0.5 * dx * wv[nx - 1, j]
            else:
                fn = 0.5 * dx * (wv[i - 1, j + 1] + wv[i, j + 1])
                fs = 0.5 * dx * (wv[i - 1, j] + wv[i, j])
            k = _flux(rows, cols, vals, k, r, me, _uid(u_kind, i, j + 1), fn, 1.0, theta)
            k = _flux(rows, cols, vals, k, r, _uid(u_kind, i, j - 1), me, fs, -1.0, theta)

    for i in range(nx):
        for j in range(1, ny):
            if v_kind[i, j] != INTERIOR:
                continue
            r = n_u + i * (ny + 1) + j
            me = r
            # north / south through cell centres
            f = 0.5 * dx * (wv[i, j] + wv[i, j + 1])
            k = _flux(rows, cols, vals, k, r, me, _vid(v_kind, i, j + 1, n_u), f, 1.0, theta)
            f = 0.5 * dx * (wv[i, j - 1] + wv[i, j])
            k = _flux(rows, cols, vals, k, r, _vid(v_kind, i, j - 1, n_u), me, f, -1.0, theta)
            # east: zero streamwise gradient at the outlet
            f = 0.5 * dy * (wu[i + 1, j - 1] + wu[i + 1, j])
            if i + 1 == nx:
                k = _flux(rows, cols, vals, k, r, me, me, f, 1.0, theta)
            else:
                k = _flux(rows, cols, vals, k, r, me, _vid(v_kind, i + 1, j, n_u), f, 1.0, theta)
            # west: v vanishes on the left edge
            f = 0.5 * dy * (wu[i, j - 1] + wu[i, j])
            k = _flux(rows, cols, vals, k, r, _vid(v_kind, i - 1, j, n_u), me, f, -1.0, theta)

    return rows[:k], cols[:k], vals[:k]


@njit(cache=True)
def gradient_triplets(u_kind, v_kind, fluid, dx, dy):
    """Gradient samples G and their quadrature weights.

    The viscous energy form is K = G^T diag(omega) G. Walls contribute
    half-distance samples against a zero wall value; the outlet has none.
    """
    nx1, ny = u_kind.shape
    nx = nx1 - 1
    n_u = nx1 * ny
    cap_s = 4 * (n_u + nx * (ny + 1)) + 4
    rows = np.empty(2 * cap_s, np.int64)
    cols = np.empty(2 * cap_s, np.int64)
    vals = np.empty(2 * cap_s)
    omega = np.empty(cap_s)
    cell = dx * dy
    k = 0
    s = 0

    # du/dx at cell centres
    for i in range(nx):
        for j in range(ny):
            if not fluid[i, j]:
                continue
            rows[k] = s; cols[k] = i * ny + j; vals[k] = -1.0 / dx; k += 1
            rows[k] = s; cols[k] = (i + 1) * ny + j; vals[k] = 1.0 / dx; k += 1
            omega[s] = cell
            s += 1

    # du/dy at corners, with wall samples
    for i in range(nx + 1):
        ex = 0.5 if (i == 0 or i == nx) else 1.0
        for j in range(ny):
            a = _uid(u_kind, i, j)
            if a < 0:
                continue
            b = _uid(u_kind, i, j + 1)
            if b >= 0:
                rows[k] = s; cols[k] = a; vals[k] = -1.0 / dy; k += 1
                rows[k] = s; cols[k] = b; vals[k] = 1.0 / dy; k += 1
                omega[s] = ex * cell
                s += 1
            else:
                rows[k] = s; cols[k] = a; vals[k] = -2.0 / dy; k += 1
                omega[s] = 0.5 * ex * cell
                s += 1
            if _uid(u_kind, i, j - 1) < 0:
                rows[k] = s; cols[k] = a; vals[k] = 2.0 / dy; k += 1
                omega[s] = 0.5 * ex * cell
                s += 1

    # dv/dy at cell centres
    for i in range(nx):
        for j in range(ny):
            if not fluid[i, j]:
                continue
            rows[k] = s; cols[k] = n_u + i * (ny + 1) + j; vals[k] = -1.0 / dy; k += 1
            rows[k] = s; cols[k] = n_u + i * (ny + 1) + j + 1; vals[k] = 1.0 / dy; k += 1
            omega[s] = cell
            s += 1

    # dv/dx at corners, with wall samples; none at the outlet
    for i in range(nx):
        for j in range(ny + 1):
            ey = 0.5 if (j == 0 or j == ny) else 1.0
            a = _vid(v_kind, i, j, n_u)
            if a < 0:
                continue
            if i + 1 < nx:
                b = _vid(v_kind, i + 1, j, n_u)
                if b >= 0:
                    rows[k] = s; cols[k] = a; vals[k] = -1.0 / dx; k += 1
                    rows[k] = s; cols[k] = b; vals[k] = 1.0 / dx; k += 1
                    omega[s] = ey * cell
                    s += 1
                else:
                    rows[k] = s; cols[k] = a; vals[k] = -2.0 / dx; k += 1
                    omega[s] = 0.5 * ey * cell
                    s += 1
            if _vid(v_kind, i - 1, j, n_u) < 0:
                rows[k] = s; cols[k] = a; vals[k] = 2.0 / dx; k += 1
                omega[s] = 0.5 * ey * cell
                s += 1

    return rows[:k], cols[:k], vals[:k], omega[:s]


@njit(cache=True)
def divergence_triplets(fluid, dx, dy):
    """Integrated divergence, one row per fluid cell (row-major cell order)."""
    nx, ny = fluid.shape
    n_u = (nx + 1) * ny
    n = 4 * nx * ny
    rows = np.empty(n, np.int64)
    cols = np.empty(n, np.int64)
    vals = np.empty(n)
    cell_id = np.full((nx, ny), -1, np.int64)
    k = 0
    c = 0
    for i in range(nx):
        for j in range(ny):
            if not fluid[i, j]:
                continue
            cell_id[i, j] = c
            rows[k] = c; cols[k] = (i + 1) * ny + j; vals[k] = dy; k += 1
            rows[k] = c; cols[k] = i * ny + j; vals[k] = -dy; k += 1
            rows[k] = c; cols[k] = n_u + i * (ny + 1) + j + 1; vals[k] = dx; k += 1
            rows[k] = c; cols[k] = n_u + i * (ny + 1) + j; vals[k] = -dx; k += 1
            c += 1
    return rows[:k], cols[:k], vals[:k], c
