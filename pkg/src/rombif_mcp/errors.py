# src/rombif_mcp/errors.py
"""Error types raised by rombif-mcp."""

from typing import Any, List, Optional


class RombifError(Exception):
    """Base error for all rombif operations."""
    pass


class GeometryError(RombifError):
    """Invalid channel geometry or parameter point."""
    pass


class GridResolutionError(GeometryError):
    """Grid too coarse to resolve the contraction slot."""
    pass


class FomConvergenceError(RombifError):
    """Full-order solve did not reach the steady state."""

    def __init__(self, message: str, residual_history: Optional[List[float]] = None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class SamplingError(RombifError):
    """Invalid sampling axis or plan."""
    pass


class BasisError(RombifError):
    """Reduced basis could not be built from the given snapshots."""
    pass


class RankDeficiencyError(BasisError):
    """Requested more modes than the snapshot set supports."""

    def __init__(self, message: str, achievable_rank: int):
        super().__init__(message)
        self.achievable_rank = achievable_rank


class OnlineSolveError(RombifError):
    """Reduced fixed-point solve failed."""

    def __init__(self, message: str, solution: Any = None):
        super().__init__(message)
        self.solution = solution

    @property
    def residual_history(self) -> List[float]:
        if self.solution is None:
            return []
        return list(self.solution.residual_history)


class SingularConstraintError(OnlineSolveError):
    """Flow-rate constraint rows are numerically zero or dependent."""
    pass


class OnlineConvergenceError(OnlineSolveError):
    """Fixed-point iteration hit max_iter."""
    pass


class OnlineOscillationError(OnlineSolveError):
    """Fixed-point residual stopped decreasing."""
    pass


class EigenSolverError(RombifError):
    """Dense eigenvalue computation failed."""
    pass


class EmptySubspaceError(RombifError):
    """The antisymmetric part of the reduced space is empty."""
    pass


class ConfigError(RombifError):
    """Campaign configuration is invalid."""
    pass


class ArchiveError(RombifError):
    """Archive could not be read or written."""
    pass


class ArchiveCorruptionError(ArchiveError):
    """Archive section failed its length or checksum check."""
    pass


class CampaignError(RombifError):
    """Offline campaign could not produce a usable archive."""
    pass
