# src/rombif_mcp/rom.py
"""Reduced operators and the constrained fixed-point Galerkin solver."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .basis import ReducedBasis
from .config import ConstraintMode, OnlineSpec
from .errors import (
    OnlineConvergenceError,
    OnlineOscillationError,
    OnlineSolveError,
    SingularConstraintError,
)
from .fom import VelocityField, jet_side
from .geometry import GeometryMode, ParameterPoint, viscosity_for
from .operators import convection_matrix, probe_matrix, viscous_matrix

logger = logging.getLogger(__name__)

OSCILLATION_WINDOW = 20


def probe_name(x: float) -> str:
    return f"x={x:g}"


@dataclass(frozen=True, eq=False)
class ReducedOperators:
    """Everything the online phase needs; no full-order arrays."""

    diffusion: np.ndarray
    convection: np.ndarray
    flowrate: np.ndarray
    inlet_traces: np.ndarray
    inlet_y: np.ndarray
    inlet_dy: float
    mirror_gram: np.ndarray
    domain_length: float
    channel_height: float = 1.0
    mean_velocity: float = 1.0
    mode: GeometryMode = GeometryMode.FULL_CHANNEL
    probes: Dict[str, np.ndarray] = field(default_factory=dict)
    training: List[Tuple[ParameterPoint, np.ndarray]] = field(default_factory=list)
    jet_moments: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.diffusion.shape[0]

    def flow_rate_for(self, lam: float) -> float:
        """Integrated streamwise velocity of the full-order inlet condition."""
        return self.mean_velocity * self.channel_height / lam * self.domain_length

    def viscosity(self, p: ParameterPoint) -> float:
        return viscosity_for(p, self.mean_velocity, self.channel_height)


@dataclass(frozen=True)
class ReducedSolution:
    coefficients: np.ndarray
    multipliers: Dict[str, float]
    iterations: int
    final_residual: float
    residual_history: List[float] = field(default_factory=list)
    parameter: Optional[ParameterPoint] = None
    converged: bool = True


def assemble_offline(
    basis: ReducedBasis,
    probe_points: Sequence[float] = (),
    training: Sequence[Tuple[ParameterPoint, VelocityField]] = (),
    mean_velocity: float = 1.0,
) -> ReducedOperators:
    """Galerkin-project the full-order operators onto ``basis``.

    ``probe_points`` are streamwise distances from the expansion plane, on
    the channel axis.
    """
    grid = basis.grid
    phi = basis.matrix
    n = basis.size
    w = grid.l2_weights

    k = viscous_matrix(grid)
    d = phi.T @ (k @ phi)
    d = 0.5 * (d + d.T)

    t = np.empty((n, n, n))
    for m in range(n):
        cm = convection_matrix(grid, phi[:, m], 1.0)
        t[:, m, :] = phi.T @ (cm @ phi)

    c = phi.T @ (w * grid.u_mask)
    mirrored = np.column_stack([grid.mirror_vector(phi[:, i]) for i in range(n)])
    mgram = phi.T @ (w[:, None] * mirrored)

    probes = {}
    for x in probe_points:
        pm = probe_matrix(grid, grid.geometry.expansion_x + x, 0.0)
        probes[probe_name(x)] = (pm @ phi).T.copy()

    train = [(p, basis.coefficients(f)) for p, f in training]
    jets = np.array([jet_side(m) for m in basis.modes])
    logger.info(f"Assembled reduced operators for N={n}")
    return ReducedOperators(
        diffusion=d,
        convection=t,
        flowrate=c,
        inlet_traces=basis.inlet_traces,
        inlet_y=grid.yc.copy(),
        inlet_dy=grid.dy,
        mirror_gram=0.5 * (mgram + mgram.T),
        domain_length=grid.length,
        channel_height=grid.geometry.channel_height,
        mean_velocity=mean_velocity,
        mode=grid.geometry.mode,
        probes=probes,
        training=train,
        jet_moments=jets,
    )


def reduced_matrix(ops: ReducedOperators, a_prev: np.ndarray, nu: float) -> np.ndarray:
    """A_lj = sum_m a_m T[l, m, j] + nu D_lj."""
    a_prev = np.asarray(a_prev, dtype=float)
    if a_prev.shape != (ops.size,):
        raise OnlineSolveError(f"Coefficient vector has shape {a_prev.shape}, expected ({ops.size},)")
    return np.einsum("lmj,m->lj", ops.convection, a_prev) + nu * ops.diffusion


def segment_weights(y: np.ndarray, dy: float, half_width: float) -> np.ndarray:
    """Fraction of each inlet cell lying inside |y| <= half_width."""
    lo = np.maximum(y - 0.5 * dy, -half_width)
    hi = np.minimum(y + 0.5 * dy, half_width)
    return np.clip(hi - lo, 0.0, None) / dy


def slot_half_width(ops: ReducedOperators, lam: float, quantized: bool = True) -> float:
    width = ops.channel_height / lam
    if quantized:
        cells = int(2 * np.floor((width / ops.inlet_dy - 1.0) / 2.0 + 0.5) + 1)
        cells = min(cells, ops.inlet_y.size)
        width = cells * ops.inlet_dy
    return 0.5 * width


def constraint_system(
    ops: ReducedOperators,
    lam: float,
    flowrate: float,
    constraint_mode: ConstraintMode = ConstraintMode.SINGLE,
    quantized: bool = True,
) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """Constraint rows G, targets g and multiplier names."""
    if constraint_mode == ConstraintMode.SINGLE:
        return ops.flowrate[None, :].copy(), np.array([flowrate]), ["alpha"]
    inside = segment_weights(ops.inlet_y, ops.inlet_dy, slot_half_width(ops, lam, quantized))
    lengths = ops.inlet_dy * inside
    rows = np.vstack([
        ops.inlet_traces @ (ops.inlet_dy - lengths),
        ops.inlet_traces @ lengths,
    ])
    targets = np.array([0.0, flowrate / ops.domain_length])
    return rows, targets, ["alpha0", "alpha_lambda"]


def _check_constraints(rows: np.ndarray) -> None:
    scale = max(np.max(np.abs(rows)), 1e-300)
    sv = np.linalg.svd(rows / scale, compute_uv=False)
    if sv.size == 0 or sv[-1] <= 1e-12 * max(sv[0], 1.0) or np.max(np.abs(rows)) == 0.0:
        raise SingularConstraintError(
            "Flow-rate constraint rows are numerically zero or linearly dependent"
        )


def _project_onto(rows: np.ndarray, targets: np.ndarray, a: np.ndarray) -> np.ndarray:
    correction = np.linalg.lstsq(rows, rows @ a - targets, rcond=None)[0]
    return a - correction


def nearest_training_guess(ops: ReducedOperators, p: ParameterPoint) -> np.ndarray:
    """Coefficients of the training snapshot closest in scaled (Re, lambda)."""
    if not ops.training:
        return np.zeros(ops.size)
    pts = np.array([[t.re, t.lam] for t, _ in ops.training])
    span = np.ptp(pts, axis=0)
    span[span == 0] = 1.0
    dist = np.sum(((pts - [p.re, p.lam]) / span) ** 2, axis=1)
    return ops.training[int(np.argmin(dist))][1].copy()


def symmetric_projector(ops: ReducedOperators) -> np.ndarray:
    return 0.5 * (np.eye(ops.size) + ops.mirror_gram)


def solve_online(
    ops: ReducedOperators,
    p: ParameterPoint,
    flowrate: Optional[float] = None,
    constraint_mode: ConstraintMode = ConstraintMode.SINGLE,
    a0: Optional[np.ndarray] = None,
    tol: float = 1e-10,
    max_iter: int = 200,
    relaxation: float = 0.7,
    symmetric: bool = False,
) -> ReducedSolution:
    """Relaxed fixed-point iteration of the bordered Galerkin system.

    Every iterate satisfies the flow-rate constraint(s) exactly, including
    the one carried by a failure.
    """
    if flowrate is None:
        flowrate = ops.flow_rate_for(p.lam)
    nu = ops.viscosity(p)
    rows, targets, names = constraint_system(ops, p.lam, flowrate, constraint_mode)
    _check_constraints(rows)
    n = ops.size
    n_c = rows.shape[0]
    sym = symmetric_projector(ops) if symmetric else None

    a = nearest_training_guess(ops, p) if a0 is None else np.array(a0, dtype=float)
    if sym is not None:
        a = sym @ a
    a = _project_onto(rows, targets, a)
    multipliers = np.zeros(n_c)
    history: List[float] = []

    def _solution(converged: bool) -> ReducedSolution:
        return ReducedSolution(
            coefficients=a.copy(),
            multipliers={k: float(v) for k, v in zip(names, multipliers)},
            iterations=len(history),
            final_residual=history[-1] if history else float("inf"),
            residual_history=list(history),
            parameter=p,
            converged=converged,
        )

    bordered = np.zeros((n + n_c, n + n_c))
    bordered[:n, n:] = rows.T
    bordered[n:, :n] = rows
    rhs = np.concatenate([np.zeros(n), targets])

    for k in range(1, max_iter + 1):
        bordered[:n, :n] = reduced_matrix(ops, a, nu)
        try:
            sol = scipy.linalg.solve(bordered, rhs, check_finite=True)
        except (scipy.linalg.LinAlgError, ValueError) as e:
            raise OnlineSolveError(f"Bordered system is singular at Re={p.re:.6g}: {e}", _solution(False))
        a_new = relaxation * sol[:n] + (1.0 - relaxation) * a
        if sym is not None:
            a_new = _project_onto(rows, targets, sym @ a_new)
        multipliers = sol[n:]
        norm = np.linalg.norm(a_new)
        residual = float(np.linalg.norm(a_new - a) / norm) if norm > 0 else 0.0
        a = a_new
        history.append(residual)
        if residual < tol:
            logger.debug(f"Online solve at Re={p.re:.6g} converged in {k} iterations")
            return _solution(True)
        if len(history) > OSCILLATION_WINDOW and min(history[-OSCILLATION_WINDOW:]) >= history[-OSCILLATION_WINDOW - 1]:
            raise OnlineOscillationError(
                f"Online residual stopped decreasing at Re={p.re:.6g} after {k} iterations",
                _solution(False),
            )
    raise OnlineConvergenceError(
        f"Online solve at Re={p.re:.6g} did not converge in {max_iter} iterations "
        f"(residual {history[-1]:.3e})",
        _solution(False),
    )


def solve_with_spec(
    ops: ReducedOperators,
    p: ParameterPoint,
    spec: OnlineSpec,
    a0: Optional[np.ndarray] = None,
    symmetric: bool = False,
) -> ReducedSolution:
    return solve_online(
        ops, p,
        constraint_mode=spec.constraint_mode,
        a0=a0,
        tol=spec.tol,
        max_iter=spec.max_iter,
        relaxation=spec.relaxation,
        symmetric=symmetric,
    )


def reconstruct(basis: ReducedBasis, solution) -> VelocityField:
    """u^N = sum_i a_i phi_i. Accepts a ReducedSolution or a coefficient vector."""
    a = getattr(solution, "coefficients", solution)
    a = np.asarray(a, dtype=float)
    if a.shape != (basis.size,):
        raise OnlineSolveError(f"{a.size} coefficients for a {basis.size}-mode basis")
    return VelocityField(basis.grid, basis.matrix @ a)


def reduced_asymmetry(ops: ReducedOperators, a: np.ndarray) -> float:
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return 0.0
    return float(np.linalg.norm(a - ops.mirror_gram @ a) / norm)


def branch_label(ops: ReducedOperators, a: np.ndarray, threshold: float = 1e-3) -> str:
    """Branch name of a reduced solution, using the per-mode jet moments."""
    if reduced_asymmetry(ops, a) < threshold or ops.jet_moments is None:
        return "Symmetric"
    return "AsymmetricUpper" if float(ops.jet_moments @ a) > 0 else "AsymmetricLower"


def antisymmetric_seed(
    ops: ReducedOperators, a: np.ndarray, amplitude: float = 1e-2, sign: int = 1
) -> np.ndarray:
    """``a`` plus a kick along the leading antisymmetric coefficient direction.

    The kick is oriented so that ``sign=+1`` pushes the jet upward.
    """
    r = 0.5 * (np.eye(ops.size) - ops.mirror_gram)
    vals, vecs = scipy.linalg.eigh(r)
    anti = vecs[:, vals >= 0.5]
    if anti.shape[1] == 0:
        return np.array(a, dtype=float)
    if ops.jet_moments is None:
        direction = anti[:, -1]
    else:
        moments = ops.jet_moments @ anti
        k = int(np.argmax(np.abs(moments)))
        direction = anti[:, k] * (1.0 if moments[k] >= 0 else -1.0)
    scale = max(np.linalg.norm(a), 1.0)
    return np.asarray(a, dtype=float) + sign * amplitude * scale * direction


def probe(ops: ReducedOperators, a: np.ndarray, name: str) -> Tuple[float, float]:
    """(u, v) of the reduced field at a probe registered offline."""
    if name not in ops.probes:
        raise OnlineSolveError(f"Unknown probe '{name}'; available: {sorted(ops.probes)}")
    u, v = ops.probes[name].T @ a
    return float(u), float(v)
