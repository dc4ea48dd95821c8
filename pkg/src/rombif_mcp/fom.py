# src/rombif_mcp/fom.py
"""Steady full-order Navier-Stokes solver on the staggered grid."""

import logging
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .config import FomConfig, Parity, PerturbationConfig
from .errors import FomConvergenceError, GeometryError
from .geometry import ChannelGeometry, Grid, ParameterPoint, inlet_profile, viscosity_for
from .operators import (
    convection_matrix,
    divergence_matrix,
    probe_matrix,
    viscous_matrix,
    weighted_norm,
)

logger = logging.getLogger(__name__)


class Branch(str, Enum):
    SYMMETRIC = "Symmetric"
    ASYMMETRIC_UPPER = "AsymmetricUpper"
    ASYMMETRIC_LOWER = "AsymmetricLower"
    UNSTABLE = "Unstable"

    @property
    def is_stable(self) -> bool:
        return self != Branch.UNSTABLE

    @property
    def is_asymmetric(self) -> bool:
        return self in (Branch.ASYMMETRIC_UPPER, Branch.ASYMMETRIC_LOWER)


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Face velocities on a grid, stored as one flat state vector."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != (self.grid.size,):
            raise GeometryError(
                f"Field of size {self.data.shape} does not match grid size {self.grid.size}"
            )

    @classmethod
    def from_components(cls, grid: Grid, u: np.ndarray, v: np.ndarray) -> "VelocityField":
        return cls(grid, np.concatenate([np.asarray(u, float).ravel(), np.asarray(v, float).ravel()]))

    @classmethod
    def zeros(cls, grid: Grid) -> "VelocityField":
        return cls(grid, np.zeros(grid.size))

    @property
    def u(self) -> np.ndarray:
        return self.data[: self.grid.n_u].reshape(self.grid.nx + 1, self.grid.ny)

    @property
    def v(self) -> np.ndarray:
        return self.data[self.grid.n_u:].reshape(self.grid.nx, self.grid.ny + 1)

    def inner(self, other: "VelocityField") -> float:
        return float(np.dot(self.grid.l2_weights * self.data, other.data))

    def norm(self) -> float:
        return weighted_norm(self.grid, self.data)

    def mirror(self) -> "VelocityField":
        return VelocityField(self.grid, self.grid.mirror_vector(self.data))

    def divergence(self) -> np.ndarray:
        """Pointwise divergence in every fluid cell."""
        return divergence_matrix(self.grid) @ self.data / (self.grid.dx * self.grid.dy)

    def inlet_trace(self) -> np.ndarray:
        return self.u[0, :].copy()


@dataclass(frozen=True, eq=False)
class Snapshot:
    """Converged full-order field at one parameter point."""

    field: VelocityField
    parameter: ParameterPoint
    branch: Branch
    convergence_residual: float
    iterations: int
    metadata: Dict[str, Any] = field(default_factory=dict)


def asymmetry_indicator(field: VelocityField) -> float:
    """||f - mirror(f)|| / ||f|| in the discrete L2 norm."""
    norm = field.norm()
    if norm == 0.0:
        return 0.0
    diff = field.data - field.grid.mirror_vector(field.data)
    return weighted_norm(field.grid, diff) / norm


def flow_rate(field: VelocityField) -> float:
    """Integrated streamwise velocity over the domain."""
    w = field.grid.l2_weights[: field.grid.n_u]
    return float(np.dot(w, field.data[: field.grid.n_u]))


def section_fluxes(field: VelocityField) -> np.ndarray:
    """Volume flux through every vertical grid line."""
    return field.u.sum(axis=1) * field.grid.dy


def probe_velocity(field: VelocityField, x: float, y: float) -> tuple:
    u, v = probe_matrix(field.grid, x, y) @ field.data
    return float(u), float(v)


def jet_side(field: VelocityField) -> float:
    """First y-moment of u downstream of the expansion; its sign gives the jet side."""
    grid = field.grid
    downstream = grid.x_faces >= grid.geometry.expansion_x
    w = grid.l2_weights[: grid.n_u].reshape(grid.nx + 1, grid.ny)
    return float(np.sum((w * field.u)[downstream] * grid.yc[None, :]))


def classify_branch(field: VelocityField, threshold: float) -> Branch:
    if asymmetry_indicator(field) < threshold:
        return Branch.SYMMETRIC
    return Branch.ASYMMETRIC_UPPER if jet_side(field) > 0 else Branch.ASYMMETRIC_LOWER


def antisymmetric_perturbation(
    grid: Grid, amplitude: float, seed: int, sign: int = 1, scale: float = 1.0
) -> np.ndarray:
    """Seeded, smooth, divergence-free field with mirror(f) = -f.

    Built from a stream function that is even in y and vanishes on every
    corner touching a wall, the inlet or the outlet.
    """
    rng = np.random.default_rng(seed)
    padded = np.zeros((grid.nx + 2, grid.ny + 2), dtype=bool)
    padded[1:-1, 1:-1] = grid.fluid
    interior = padded[:-1, :-1] & padded[1:, :-1] & padded[:-1, 1:] & padded[1:, 1:]

    xs = grid.x_faces / grid.length
    ys = grid.y_faces / grid.height
    psi = np.zeros((grid.nx + 1, grid.ny + 1))
    for k in range(1, 5):
        for m in range(4):
            a = rng.standard_normal()
            psi += a * np.outer(np.sin(k * np.pi * xs), np.cos(2.0 * m * np.pi * ys))
    psi[~interior] = 0.0
    psi = 0.5 * (psi + psi[:, ::-1])

    u = (psi[:, 1:] - psi[:, :-1]) / grid.dy
    v = -(psi[1:, :] - psi[:-1, :]) / grid.dx
    data = np.concatenate([u.ravel(), v.ravel()])
    peak = np.max(np.abs(data))
    if peak == 0.0:
        return data
    return sign * amplitude * scale * data / peak


class _PseudoTimeMarcher:
    """Implicit pseudo-time steps of the coupled velocity-pressure system."""

    def __init__(self, grid: Grid, nu: float, fixed_values: np.ndarray):
        self.grid = grid
        self.nu = nu
        self.K = viscous_matrix(grid)
        B = divergence_matrix(grid)
        self.free = np.flatnonzero(grid.free_mask)
        self.fixed = np.flatnonzero(~grid.free_mask)
        self.B_free = B[:, self.free].tocsr()
        self.div_rhs = -(B[:, self.fixed] @ fixed_values[self.fixed])
        self.w_free = grid.l2_weights[self.free]
        self.fixed_values = fixed_values

    def solve(self, x: np.ndarray, dt: Optional[float], theta: float, convect: bool = True):
        grid = self.grid
        op = self.nu * self.K
        if convect:
            op = op + convection_matrix(grid, x, theta)
        op = op.tocsr()
        op_ff = op[self.free][:, self.free]
        rhs = -(op[self.free][:, self.fixed] @ self.fixed_values[self.fixed])
        if dt is not None:
            op_ff = op_ff + sp.diags(self.w_free / dt)
            rhs = rhs + self.w_free * x[self.free] / dt
        saddle = sp.bmat([[op_ff, -self.B_free.T], [self.B_free, None]], format="csc")
        sol = splu(saddle).solve(np.concatenate([rhs, self.div_rhs]))
        out = self.fixed_values.copy()
        out[self.free] = sol[: self.free.size]
        return out, sol[self.free.size:]

    def steady_residual(self, x: np.ndarray, p: np.ndarray) -> float:
        op = (self.nu * self.K + convection_matrix(self.grid, x, 1.0)).tocsr()
        r = (op @ x)[self.free] - self.B_free.T @ p
        scale = np.linalg.norm((self.nu * self.K @ x)[self.free]) or 1.0
        return float(np.linalg.norm(r) / scale)


def _blend(increment: float, start: float, end: float) -> float:
    if increment >= start:
        return 0.0
    if increment <= end:
        return 1.0
    return float((np.log10(start) - np.log10(increment)) / (np.log10(start) - np.log10(end)))


def solve_steady(
    geom: ChannelGeometry,
    grid: Grid,
    p: ParameterPoint,
    config: Optional[FomConfig] = None,
    initial: Optional[VelocityField] = None,
    symmetric: bool = False,
) -> Snapshot:
    """March to the steady state at parameter ``p``.

    With ``symmetric`` set, the iterate is averaged with its mirror after
    every pseudo-time step, which keeps the solver on the symmetric branch
    even where that branch is unstable.
    """
    config = config or FomConfig()
    if grid.geometry != geom:
        raise GeometryError("Grid was not built for this geometry")
    if initial is not None and not initial.grid.compatible(grid):
        raise GeometryError("Initial field lives on a different grid")
    if abs(p.lam - geom.lam) > 1e-12 * geom.lam:
        raise GeometryError(f"Parameter lambda={p.lam} does not match geometry lambda={geom.lam}")

    started = time.perf_counter()
    nu = viscosity_for(p, config.mean_velocity, geom.channel_height)
    fixed = np.zeros(grid.size)
    fixed[grid.inlet_indices] = np.where(grid.inlet_rows, inlet_profile(grid, config.mean_velocity), 0.0)
    marcher = _PseudoTimeMarcher(grid, nu, fixed)

    if initial is None:
        x, pressure = marcher.solve(fixed, None, 1.0, convect=False)
        warm = False
    else:
        x = initial.data.copy()
        x[marcher.fixed] = fixed[marcher.fixed]
        warm = True

    pert = config.perturbation
    perturbed = pert.parity == Parity.ANTISYMMETRIC and pert.amplitude > 0 and not symmetric
    if perturbed:
        x = x + antisymmetric_perturbation(grid, pert.amplitude, pert.seed, pert.sign, config.mean_velocity)
    if symmetric:
        x = 0.5 * (x + grid.mirror_vector(x))

    cap = config.branch_pseudo_step if perturbed else config.max_pseudo_step
    peak = max(np.max(np.abs(fixed)), config.mean_velocity)
    dt = config.pseudo_time_step_safety * min(grid.dx, grid.dy) / peak
    theta = 0.0
    history: List[float] = []
    pressure = np.zeros(marcher.B_free.shape[0])

    for step in range(1, config.max_steps + 1):
        x_new, pressure = marcher.solve(x, dt, theta)
        if symmetric:
            x_new = 0.5 * (x_new + grid.mirror_vector(x_new))
        norm = weighted_norm(grid, x_new)
        if not np.isfinite(norm) or norm == 0.0:
            raise FomConvergenceError(
                f"Full-order solve diverged at Re={p.re:.6g}, lambda={p.lam:.6g} (step {step})",
                history,
            )
        increment = weighted_norm(grid, x_new - x) / norm
        if history and increment > 0:
            dt = dt * float(np.clip(history[-1] / increment, 0.5, 2.0))
        dt = min(dt, cap)
        history.append(increment)
        x = x_new
        theta = max(theta, _blend(increment, config.blend_start, config.blend_end))
        if theta >= 1.0 and increment < config.stop_tolerance:
            break
    else:
        raise FomConvergenceError(
            f"Full-order solve at Re={p.re:.6g}, lambda={p.lam:.6g} did not converge in "
            f"{config.max_steps} steps (last increment {history[-1]:.3e})",
            history,
        )

    result = VelocityField(grid, x)
    indicator = asymmetry_indicator(result)
    branch = classify_branch(result, config.asymmetry_threshold)
    elapsed = time.perf_counter() - started
    logger.info(
        f"Solved steady flow at Re={p.re:.6g}, lambda={p.lam:.6g} in {step} steps "
        f"({branch.value}, asymmetry {indicator:.3e})"
    )
    metadata = {
        "steady_residual": marcher.steady_residual(x, pressure),
        "wall_time": elapsed,
        "warm_start": warm,
        "symmetry_projection": symmetric,
        "blend_factor": theta,
        "flow_rate": flow_rate(result),
        "asymmetry": indicator,
        "nu": nu,
        "perturbation": pert.model_dump(mode="json") if perturbed else None,
        "residual_tail": history[-10:],
    }
    return Snapshot(
        field=result,
        parameter=p,
        branch=branch,
        convergence_residual=history[-1],
        iterations=step,
        metadata=metadata,
    )


def find_both_branches(
    geom: ChannelGeometry,
    grid: Grid,
    p: ParameterPoint,
    config: Optional[FomConfig] = None,
) -> List[Snapshot]:
    """Symmetric solution, plus the asymmetric one where it exists.

    The symmetric solve uses mirror projection; the asymmetric solve starts
    from it with an antisymmetric perturbation. A failed asymmetric solve
    keeps the symmetric snapshot and records the failure in its metadata.
    """
    config = config or FomConfig()
    pert = config.perturbation
    if pert.parity != Parity.ANTISYMMETRIC or pert.amplitude == 0:
        pert = PerturbationConfig(
            amplitude=pert.amplitude or 1e-3, seed=pert.seed,
            parity=Parity.ANTISYMMETRIC, sign=pert.sign,
        )
    sym = solve_steady(geom, grid, p, config, symmetric=True)
    try:
        asym = solve_steady(
            geom, grid, p, config.model_copy(update={"perturbation": pert}), initial=sym.field
        )
    except Exception as e:
        logger.warning(f"Asymmetric solve failed at Re={p.re:g}, lambda={p.lam:g}: {e}")
        return [replace(sym, metadata={**sym.metadata, "asymmetric_failure": str(e)})]
    if not asym.branch.is_asymmetric:
        return [sym]
    return [replace(sym, branch=Branch.UNSTABLE), asym]
