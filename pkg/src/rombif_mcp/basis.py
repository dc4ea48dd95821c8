# src/rombif_mcp/basis.py
"""Reduced bases from snapshot sets: POD and Gram-Schmidt."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .config import BranchPolicy
from .errors import BasisError, RankDeficiencyError
from .fom import Branch, Snapshot, VelocityField
from .geometry import Grid

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-12
DROP_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class ReducedBasis:
    """Orthonormal velocity modes, stored as the columns of ``matrix``."""

    grid: Grid
    matrix: np.ndarray
    energies: np.ndarray
    source: Dict[str, Any] = field(default_factory=dict)
    spectrum: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.matrix.shape[1]

    @property
    def modes(self) -> List[VelocityField]:
        return [VelocityField(self.grid, self.matrix[:, i].copy()) for i in range(self.size)]

    @property
    def inlet_traces(self) -> np.ndarray:
        """(N, ny) x-velocity of every mode along the left edge."""
        return self.matrix[self.grid.inlet_indices, :].T.copy()

    def gram(self) -> np.ndarray:
        w = self.grid.l2_weights
        return self.matrix.T @ (w[:, None] * self.matrix)

    def coefficients(self, field: VelocityField) -> np.ndarray:
        return self.matrix.T @ (self.grid.l2_weights * field.data)

    def truncate(self, n: int) -> "ReducedBasis":
        if not 1 <= n <= self.size:
            raise BasisError(f"Cannot truncate a {self.size}-mode basis to {n}")
        source = dict(self.source, truncation={"rule": "fixed", "n": n})
        return ReducedBasis(self.grid, self.matrix[:, :n].copy(), self.energies[:n].copy(),
                            source, self.spectrum)


def _stack(snapshots: Sequence[VelocityField]) -> Tuple[Grid, np.ndarray]:
    if not snapshots:
        raise BasisError("At least one snapshot is required")
    grid = snapshots[0].grid
    for s in snapshots[1:]:
        if not s.grid.compatible(grid):
            raise BasisError("Snapshots live on incompatible grids")
    return grid, np.column_stack([s.data for s in snapshots])


def correlation_matrix(snapshots: Sequence[VelocityField]) -> np.ndarray:
    """C_ij = (u_i, u_j) in the discrete L2 product."""
    grid, x = _stack(snapshots)
    c = x.T @ (grid.l2_weights[:, None] * x)
    return 0.5 * (c + c.T)


def _orthonormalize(grid: Grid, x: np.ndarray, drop: float) -> Tuple[np.ndarray, List[int]]:
    """Modified Gram-Schmidt with one re-orthogonalization pass."""
    w = grid.l2_weights
    kept: List[np.ndarray] = []
    dropped: List[int] = []
    for k in range(x.shape[1]):
        v = x[:, k].copy()
        original = np.sqrt(np.dot(w * v, v))
        for _ in range(2):
            for q in kept:
                v -= np.dot(w * q, v) * q
        norm = np.sqrt(np.dot(w * v, v))
        if original == 0.0 or norm < drop * original:
            dropped.append(k)
            continue
        kept.append(v / norm)
    if not kept:
        return np.zeros((x.shape[0], 0)), dropped
    return np.column_stack(kept), dropped


def pod(
    snapshots: Sequence[VelocityField],
    n_modes: Optional[int] = None,
    energy: Optional[float] = None,
    ids: Optional[Sequence[str]] = None,
) -> ReducedBasis:
    """POD basis through the snapshot correlation matrix.

    Truncation is by ``n_modes`` or by retained ``energy`` fraction; with
    neither, every numerically independent direction is kept.
    """
    if n_modes is not None and energy is not None:
        raise BasisError("Give either n_modes or energy, not both")
    grid, x = _stack(snapshots)
    c = correlation_matrix(snapshots)
    vals, vecs = scipy.linalg.eigh(c)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    if vals[0] <= 0:
        raise RankDeficiencyError("All snapshots are zero", achievable_rank=0)
    rank = int(np.sum(vals > RANK_TOLERANCE * vals[0]))

    if n_modes is not None:
        if n_modes > rank:
            raise RankDeficiencyError(
                f"Requested {n_modes} modes but the snapshot set has rank {rank}",
                achievable_rank=rank,
            )
        n = n_modes
        rule = {"rule": "fixed", "n": n}
    elif energy is not None:
        cumulative = np.cumsum(vals[:rank]) / np.sum(vals[:rank])
        n = int(min(rank, np.searchsorted(cumulative, energy - 1e-15) + 1))
        rule = {"rule": "energy", "fraction": energy, "n": n}
    else:
        n = rank
        rule = {"rule": "rank", "n": n}

    modes = x @ vecs[:, :n] / np.sqrt(vals[:n])
    modes, dropped = _orthonormalize(grid, modes, DROP_TOLERANCE)
    if dropped:
        raise RankDeficiencyError(
            f"POD modes {dropped} lost independence during normalization", achievable_rank=modes.shape[1]
        )
    logger.info(f"Built POD basis with {n} of {len(snapshots)} snapshots (rank {rank})")
    source = {
        "method": "pod",
        "snapshot_ids": list(ids) if ids is not None else list(range(len(snapshots))),
        "truncation": rule,
        "rank": rank,
    }
    return ReducedBasis(grid, modes, vals[:n].copy(), source, np.clip(vals, 0.0, None))


def gram_schmidt(
    snapshots: Sequence[VelocityField], ids: Optional[Sequence[str]] = None
) -> ReducedBasis:
    """Sequential orthonormalization; near-dependent snapshots are dropped.

    ``energies`` holds the leading eigenvalues of the snapshot correlation
    matrix, i.e. the POD energies of the spanned space.
    """
    grid, x = _stack(snapshots)
    modes, dropped = _orthonormalize(grid, x, DROP_TOLERANCE)
    if modes.shape[1] == 0:
        raise BasisError("Every snapshot was dropped as degenerate")
    vals = np.sort(np.clip(scipy.linalg.eigvalsh(correlation_matrix(snapshots)), 0.0, None))[::-1]
    ids = list(ids) if ids is not None else list(range(len(snapshots)))
    source = {
        "method": "gram_schmidt",
        "snapshot_ids": ids,
        "dropped": [ids[k] for k in dropped],
        "truncation": {"rule": "rank", "n": modes.shape[1]},
    }
    if dropped:
        logger.info(f"Gram-Schmidt dropped {len(dropped)} degenerate snapshots")
    return ReducedBasis(grid, modes, vals[: modes.shape[1]].copy(), source, vals)


def projection_error(basis: ReducedBasis, field: VelocityField) -> float:
    """||f - P f|| / ||f|| with P the L2-orthogonal projector onto the basis."""
    if not field.grid.compatible(basis.grid):
        raise BasisError("Field and basis live on incompatible grids")
    norm = field.norm()
    if norm == 0.0:
        return 0.0
    residual = field.data - basis.matrix @ basis.coefficients(field)
    return float(np.sqrt(np.dot(basis.grid.l2_weights * residual, residual)) / norm)


def retained_energy(basis: ReducedBasis, n: Optional[int] = None) -> float:
    """Fraction of the snapshot energy captured by the first ``n`` modes."""
    spectrum = basis.spectrum if basis.spectrum is not None else basis.energies
    n = basis.size if n is None else n
    total = float(np.sum(spectrum))
    return float(np.sum(spectrum[:n]) / total) if total > 0 else 0.0


def select_snapshots(
    snapshots: Sequence[Snapshot],
    policy: BranchPolicy = BranchPolicy.STABLE_ONLY,
    mirror_augment: bool = True,
) -> Tuple[List[VelocityField], List[str]]:
    """Pick the fields a basis is built from, with their provenance ids.

    ``mirror_augment`` adds the mirror image of every asymmetric field so
    the spanned space is closed under reflection.
    """
    if policy == BranchPolicy.STABLE_ONLY:
        keep = [s.branch.is_stable for s in snapshots]
    elif policy == BranchPolicy.UNSTABLE_ONLY:
        keep = [s.branch in (Branch.SYMMETRIC, Branch.UNSTABLE) for s in snapshots]
    else:
        logger.warning("MixedBranches bases are experimental and may oscillate online")
        keep = [True] * len(snapshots)
    fields: List[VelocityField] = []
    ids: List[str] = []
    for k, (snap, use) in enumerate(zip(snapshots, keep)):
        if not use:
            continue
        fields.append(snap.field)
        ids.append(f"{k}")
        if mirror_augment and snap.branch.is_asymmetric:
            fields.append(snap.field.mirror())
            ids.append(f"{k}:mirror")
    if not fields:
        raise BasisError(f"No snapshots match the {policy.value} policy")
    return fields, ids
