# src/rombif_mcp/stability.py
"""Reduced linear stability, eigenvalue tracking and bifurcation detection."""

import csv
import io
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from .basis import ReducedBasis
from .config import ConstraintMode
from .errors import EigenSolverError, EmptySubspaceError, OnlineSolveError
from .geometry import ParameterPoint
from .rom import ReducedOperators, ReducedSolution, nearest_training_guess, solve_online

logger = logging.getLogger(__name__)


class Variant(str, Enum):
    CONVECTION_ONLY = "ConvectionOnly"
    FULL_JACOBIAN = "FullJacobian"


class Indicator(str, Enum):
    TRACKED_EIGENVALUE = "TrackedEigenvalue"
    ANTISYMMETRIC_EIGENVALUE = "AntisymmetricEigenvalue"


@dataclass(frozen=True, eq=False)
class ReducedLinearizedOperator:
    matrix: np.ndarray
    variant: Variant
    base_coefficients: np.ndarray
    nu: float = 0.0


@dataclass(frozen=True, eq=False)
class EigenRecord:
    re: float
    eigenvalues: np.ndarray
    critical_eigenvalue: complex
    order: np.ndarray
    iterations: int = 0


@dataclass(eq=False)
class EigenTrace:
    records: List[EigenRecord] = field(default_factory=list)
    tracked: Optional[int] = None

    def tracked_path(self) -> np.ndarray:
        if self.tracked is None:
            return np.array([r.critical_eigenvalue for r in self.records])
        return np.array([r.eigenvalues[r.order[self.tracked]] for r in self.records])


@dataclass(frozen=True)
class DetectOptions:
    indicator: Indicator = Indicator.TRACKED_EIGENVALUE
    symmetric_base: bool = True
    continuation: bool = True
    compare_cold_start: bool = False
    constraint_mode: ConstraintMode = ConstraintMode.SINGLE
    tol: float = 1e-10
    max_iter: int = 200
    relaxation: float = 0.7
    max_bisections: int = 60


@dataclass(eq=False)
class BifurcationResult:
    status: str
    lam: float
    variant: Variant
    indicator: Indicator
    trace: EigenTrace
    bracket: Optional[Tuple[float, float]] = None
    refined_re_sb: Optional[float] = None
    delta_re: float = 0.0
    symmetric_base: bool = True
    predictor_iterations: int = 0
    cold_start_iterations: Optional[int] = None
    refinement: List[Tuple[float, complex]] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.status == "found"

    def summary(self) -> dict:
        return {
            "status": self.status,
            "lambda": self.lam,
            "variant": self.variant.value,
            "indicator": self.indicator.value,
            "bracket": list(self.bracket) if self.bracket else None,
            "refined_re_sb": self.refined_re_sb,
            "delta_re": self.delta_re,
            "symmetric_base": self.symmetric_base,
            "sweep_points": len(self.trace.records),
            "predictor_iterations": self.predictor_iterations,
            "cold_start_iterations": self.cold_start_iterations,
        }


def assemble_linearized(
    ops: ReducedOperators,
    a: np.ndarray,
    nu: float,
    variant: Variant = Variant.FULL_JACOBIAN,
) -> ReducedLinearizedOperator:
    """L_kl = sum_m a_m (T[k,m,l] + T[k,l,m]), plus nu D for the full Jacobian."""
    a = np.asarray(a, dtype=float)
    if a.shape != (ops.size,):
        raise OnlineSolveError(f"Base coefficients have shape {a.shape}, expected ({ops.size},)")
    t = ops.convection
    matrix = np.einsum("kml,m->kl", t, a) + np.einsum("klm,m->kl", t, a)
    variant = Variant(variant)
    if variant == Variant.FULL_JACOBIAN:
        matrix = matrix + nu * ops.diffusion
    return ReducedLinearizedOperator(matrix, variant, a.copy(), nu)


def _sorted(values: np.ndarray) -> np.ndarray:
    return values[np.lexsort((values.imag, values.real))]


def eigenvalues(op: Union[ReducedLinearizedOperator, np.ndarray]) -> np.ndarray:
    """All eigenvalues, ascending by real part.

    Balancing and Hessenberg reduction precede the shifted QR sweep.
    """
    a = np.asarray(getattr(op, "matrix", op), dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise EigenSolverError(f"Need a non-empty square matrix, got shape {a.shape}")
    try:
        balanced, _ = scipy.linalg.matrix_balance(a, permute=True, scale=True)
        h = scipy.linalg.hessenberg(balanced)
        vals = scipy.linalg.eigvals(h, check_finite=True)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise EigenSolverError(f"QR iteration failed to converge: {e}")
    if not np.all(np.isfinite(vals)):
        raise EigenSolverError("QR iteration produced non-finite eigenvalues")
    return _sorted(vals.astype(complex))


def _mirror_gram(basis: Union[ReducedBasis, ReducedOperators]) -> np.ndarray:
    if isinstance(basis, ReducedOperators):
        return basis.mirror_gram
    grid = basis.grid
    phi = basis.matrix
    mirrored = np.column_stack([grid.mirror_vector(phi[:, i]) for i in range(basis.size)])
    m = phi.T @ (grid.l2_weights[:, None] * mirrored)
    return 0.5 * (m + m.T)


def symmetry_restricted_spectrum(
    basis: Union[ReducedBasis, ReducedOperators],
    op: Union[ReducedLinearizedOperator, np.ndarray],
) -> np.ndarray:
    """Eigenvalues of L restricted to the mirror-antisymmetric subspace."""
    m = _mirror_gram(basis)
    r = 0.5 * (np.eye(m.shape[0]) - m)
    vals, vecs = scipy.linalg.eigh(r)
    z = vecs[:, vals >= 0.5]
    if z.shape[1] == 0:
        raise EmptySubspaceError("The reduced space has no antisymmetric component")
    matrix = np.asarray(getattr(op, "matrix", op), dtype=float)
    return eigenvalues(z.T @ matrix @ z)


def mode_parity(
    basis: Union[ReducedBasis, ReducedOperators],
    op: Union[ReducedLinearizedOperator, np.ndarray],
    target: complex,
) -> float:
    """Mirror parity of the eigenvector whose eigenvalue is nearest ``target``.

    +1 for a mirror-symmetric mode, -1 for an antisymmetric one.
    """
    m = _mirror_gram(basis)
    matrix = np.asarray(getattr(op, "matrix", op), dtype=float)
    try:
        vals, vecs = scipy.linalg.eig(matrix)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise EigenSolverError(f"Eigenvector computation failed: {e}")
    v = vecs[:, int(np.argmin(np.abs(vals - target)))]
    return float(np.real(np.vdot(v, m @ v)) / np.real(np.vdot(v, v)))


def continuation_step(
    prev: Sequence[Tuple[float, np.ndarray]], target_re: float
) -> np.ndarray:
    """Secant predictor from the last two (Re, coefficients) pairs."""
    if not prev:
        raise OnlineSolveError("Continuation needs at least one prior solution")
    re1, a1 = prev[-1]
    a1 = np.asarray(a1, dtype=float)
    if len(prev) < 2:
        return a1.copy()
    re0, a0 = prev[-2]
    if re1 == re0:
        return a1.copy()
    return a1 + (a1 - np.asarray(a0, dtype=float)) * ((target_re - re1) / (re1 - re0))


def match_spectra(previous: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Greedy nearest-neighbour assignment: result[i] indexes ``current``."""
    n = previous.size
    dist = np.abs(previous[:, None] - current[None, :])
    out = np.full(n, -1, dtype=int)
    used_rows = np.zeros(n, dtype=bool)
    used_cols = np.zeros(current.size, dtype=bool)
    for flat in np.argsort(dist, axis=None, kind="stable"):
        i, j = divmod(int(flat), current.size)
        if used_rows[i] or used_cols[j]:
            continue
        out[i] = j
        used_rows[i] = True
        used_cols[j] = True
    return out


def track_eigenvalues(spectra: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Trajectory-to-index maps for a sequence of spectra."""
    if not spectra:
        return []
    orders = [np.arange(spectra[0].size)]
    for prev, cur in zip(spectra, spectra[1:]):
        path = prev[orders[-1]]
        orders.append(match_spectra(path, cur))
    return orders


def _is_real(z: complex, scale: float) -> bool:
    return abs(z.imag) <= 1e-10 * max(scale, 1.0)


def _critical(values: np.ndarray) -> complex:
    real = [z for z in values if _is_real(z, abs(z))]
    pool = real if real else list(values)
    return complex(min(pool, key=lambda z: abs(z.real)))


def trace_csv(trace: EigenTrace) -> str:
    """RFC-4180 CSV with columns re, k, real, imag, tracked_flag."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["re", "k", "real", "imag", "tracked_flag"])
    for rec in trace.records:
        tracked_idx = rec.order[trace.tracked] if trace.tracked is not None else -1
        for k, z in enumerate(rec.eigenvalues):
            writer.writerow([repr(rec.re), k, repr(float(z.real)), repr(float(z.imag)),
                             int(k == tracked_idx)])
    return buf.getvalue()


class _Sweep:
    """Online solve plus spectrum at one Reynolds number."""

    def __init__(self, ops, lam, variant, options, basis):
        self.ops = ops
        self.lam = lam
        self.variant = variant
        self.options = options
        self.basis = basis

    def solve(self, re: float, a0: Optional[np.ndarray]) -> ReducedSolution:
        p = ParameterPoint(re=re, lam=self.lam)
        try:
            return solve_online(
                self.ops, p,
                constraint_mode=self.options.constraint_mode,
                a0=a0,
                tol=self.options.tol,
                max_iter=self.options.max_iter,
                relaxation=self.options.relaxation,
                symmetric=self.options.symmetric_base,
            )
        except OnlineSolveError as e:
            e.add_note(f"while sweeping lambda={self.lam:g} at Re={re:.6g}")
            raise

    def _linearized(self, re: float, a: np.ndarray) -> ReducedLinearizedOperator:
        nu = self.ops.viscosity(ParameterPoint(re=re, lam=self.lam))
        return assemble_linearized(self.ops, a, nu, self.variant)

    def spectrum(self, re: float, a: np.ndarray) -> np.ndarray:
        op = self._linearized(re, a)
        if self.options.indicator == Indicator.ANTISYMMETRIC_EIGENVALUE:
            return symmetry_restricted_spectrum(self.basis or self.ops, op)
        return eigenvalues(op)

    def is_antisymmetric(self, re: float, a: np.ndarray, z: complex) -> bool:
        if self.options.indicator == Indicator.ANTISYMMETRIC_EIGENVALUE:
            return True
        return mode_parity(self.basis or self.ops, self._linearized(re, a), z) < 0.0


def detect_bifurcation(
    basis: Optional[ReducedBasis],
    ops: ReducedOperators,
    lam: float,
    re_range: Tuple[float, float],
    delta_re: Optional[float] = None,
    variant: Variant = Variant.FULL_JACOBIAN,
    options: Optional[DetectOptions] = None,
) -> BifurcationResult:
    """Sweep Re upward and bracket the real eigenvalue of an antisymmetric mode
    that changes sign.

    The bracket is refined by bisection to width <= delta_re / 10. No sign
    change gives a result with status "not_found" and the full trace.
    """
    options = options or DetectOptions()
    variant = Variant(variant)
    re_lo, re_hi = float(re_range[0]), float(re_range[1])
    if not 0 < re_lo < re_hi:
        raise OnlineSolveError(f"Invalid Reynolds range {re_range}")
    delta_re = float(delta_re) if delta_re else (re_hi - re_lo) / 200.0
    sweep = _Sweep(ops, lam, variant, options, basis)

    n_steps = int(np.ceil((re_hi - re_lo) / delta_re - 1e-9))
    re_values = [min(re_lo + i * delta_re, re_hi) for i in range(n_steps + 1)]
    trace = EigenTrace()
    history: List[Tuple[float, np.ndarray]] = []
    spectra: List[np.ndarray] = []
    cold_total = 0 if options.compare_cold_start else None
    predictor_total = 0
    crossing: Optional[Tuple[int, int]] = None

    for re in re_values:
        if history and options.continuation:
            a0 = continuation_step(history[-2:], re)
        elif history:
            a0 = history[-1][1]
        else:
            a0 = nearest_training_guess(ops, ParameterPoint(re=re, lam=lam))
        sol = sweep.solve(re, a0)
        predictor_total += sol.iterations
        if cold_total is not None:
            cold_total += sweep.solve(re, None).iterations
        history.append((re, sol.coefficients))
        vals = sweep.spectrum(re, sol.coefficients)
        if spectra and vals.size == spectra[-1].size:
            prev_path = trace.records[-1].eigenvalues[trace.records[-1].order]
            order = match_spectra(prev_path, vals)
        else:
            order = np.arange(vals.size)
        spectra.append(vals)
        trace.records.append(EigenRecord(re, vals, _critical(vals), order, sol.iterations))

        if crossing is None and len(trace.records) > 1:
            prev, cur = trace.records[-2], trace.records[-1]
            scale = float(np.max(np.abs(cur.eigenvalues)))
            for t in range(cur.order.size):
                z0 = prev.eigenvalues[prev.order[t]]
                z1 = cur.eigenvalues[cur.order[t]]
                if not (_is_real(z0, scale) and _is_real(z1, scale) and z0.real * z1.real < 0):
                    continue
                if not sweep.is_antisymmetric(prev.re, history[-2][1], z0):
                    logger.info(f"Ignoring symmetric-mode sign change between Re={prev.re:.6g} and {cur.re:.6g}")
                    continue
                crossing = (len(trace.records) - 2, t)
                break
        if crossing is not None:
            break

    result = BifurcationResult(
        status="not_found",
        lam=lam,
        variant=variant,
        indicator=options.indicator,
        trace=trace,
        delta_re=delta_re,
        symmetric_base=options.symmetric_base,
        predictor_iterations=predictor_total,
        cold_start_iterations=cold_total,
    )
    if crossing is None:
        logger.info(f"No sign change for lambda={lam:g} on Re in [{re_lo:g}, {re_hi:g}]")
        return result

    idx, t = crossing
    trace.tracked = t
    lo_rec, hi_rec = trace.records[idx], trace.records[idx + 1]
    lo = (lo_rec.re, lo_rec.eigenvalues[lo_rec.order[t]], history[idx][1])
    hi = (hi_rec.re, hi_rec.eigenvalues[hi_rec.order[t]], history[idx + 1][1])

    for _ in range(options.max_bisections):
        if hi[0] - lo[0] <= delta_re / 10.0:
            break
        mid = 0.5 * (lo[0] + hi[0])
        s = (mid - lo[0]) / (hi[0] - lo[0])
        guess = (1 - s) * lo[2] + s * hi[2]
        sol = sweep.solve(mid, guess)
        vals = sweep.spectrum(mid, sol.coefficients)
        target = (1 - s) * lo[1] + s * hi[1]
        z = complex(vals[int(np.argmin(np.abs(vals - target)))])
        result.refinement.append((mid, z))
        if np.sign(z.real) == np.sign(lo[1].real):
            lo = (mid, z, sol.coefficients)
        else:
            hi = (mid, z, sol.coefficients)

    result.status = "found"
    result.bracket = (lo[0], hi[0])
    result.refined_re_sb = 0.5 * (lo[0] + hi[0])
    logger.info(
        f"Symmetry breaking for lambda={lam:g} near Re={result.refined_re_sb:.6g} "
        f"(bracket [{lo[0]:.6g}, {hi[0]:.6g}], {variant.value})"
    )
    return result
