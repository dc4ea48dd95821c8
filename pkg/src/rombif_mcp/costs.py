# src/rombif_mcp/costs.py
"""Offline/online cost accounting and the break-even quotients."""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

# Full-order runs a sweep-based bifurcation search costs without a reduced model.
RUNS_PER_DETECTION = 80


@dataclass
class CostLedger:
    """Wall times of every phase, in seconds (or any consistent unit)."""

    snapshot_times: List[float] = field(default_factory=list)
    basis_time: float = 0.0
    assembly_time: float = 0.0
    online_query_times: List[float] = field(default_factory=list)
    detection_times: List[float] = field(default_factory=list)
    single_fom_time: Optional[float] = None

    @property
    def offline_time(self) -> float:
        return float(sum(self.snapshot_times) + self.basis_time + self.assembly_time)

    @property
    def reference_fom_time(self) -> float:
        """Cost of one full-order solve; the mean snapshot time unless given."""
        if self.single_fom_time is not None:
            return float(self.single_fom_time)
        if not self.snapshot_times:
            return 0.0
        return float(sum(self.snapshot_times) / len(self.snapshot_times))

    def record_query(self, seconds: float) -> None:
        self.online_query_times.append(float(seconds))

    def record_detection(self, seconds: float) -> None:
        self.detection_times.append(float(seconds))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CostLedger":
        return cls(
            snapshot_times=[float(t) for t in data.get("snapshot_times", [])],
            basis_time=float(data.get("basis_time", 0.0)),
            assembly_time=float(data.get("assembly_time", 0.0)),
            online_query_times=[float(t) for t in data.get("online_query_times", [])],
            detection_times=[float(t) for t in data.get("detection_times", [])],
            single_fom_time=data.get("single_fom_time"),
        )


def _mean(values: List[float]) -> float:
    return float(sum(values) / len(values)) if values else 0.0


def report_costs(
    ledger: CostLedger,
    detections: Optional[int] = None,
    runs_per_detection: int = RUNS_PER_DETECTION,
) -> Dict[str, Any]:
    """Savings fraction, per-query ratio and break-even count.

    savings = (offline + n * online_detection) / (n * runs_per_detection * fom)
    break_even = offline / fom, reported raw and rounded up.

    ``detections`` defaults to the recorded detection count, or one
    detection of negligible online cost when none were recorded.
    """
    fom = ledger.reference_fom_time
    offline = ledger.offline_time
    n = detections if detections is not None else max(len(ledger.detection_times), 1)
    online_detect = _mean(ledger.detection_times)
    mean_query = _mean(ledger.online_query_times)

    if fom > 0:
        break_even_raw: Optional[float] = offline / fom
        break_even: Optional[int] = math.ceil(break_even_raw - 1e-12)
        per_query = mean_query / fom if ledger.online_query_times else None
    else:
        break_even_raw = break_even = per_query = None

    denominator = n * runs_per_detection * fom
    savings = (offline + n * online_detect) / denominator if denominator > 0 else None

    return {
        "offline_time": offline,
        "snapshot_solves": len(ledger.snapshot_times),
        "single_fom_time": fom,
        "query_count": len(ledger.online_query_times),
        "mean_query_time": mean_query,
        "per_query_ratio": per_query,
        "detections": n,
        "runs_per_detection": runs_per_detection,
        "savings_fraction": savings,
        "savings_percent": None if savings is None else 100.0 * savings,
        "break_even_raw": break_even_raw,
        "break_even": break_even,
    }
