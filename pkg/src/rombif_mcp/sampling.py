# src/rombif_mcp/sampling.py
"""Gauss-Lobatto-Chebyshev tensor sampling of the parameter space."""

import csv
import io
import itertools
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import AxisSpec
from .errors import GeometryError, SamplingError
from .geometry import ParameterPoint, reynolds_for

# Viscosities and expansion ratios of the published two-parameter study.
STUDY_VISCOSITIES = [1.5e-3, 1.73446e-3, 2.375e-3, 4.125e-3, 4.76554e-3, 5e-3]
STUDY_EXPANSION_RATIOS = [2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0]
STUDY_MEAN_VELOCITY = 2.0 / 3.0


def chebyshev_points(lo: float, hi: float, n: int) -> List[float]:
    """Gauss-Lobatto-Chebyshev abscissae mapped to [lo, hi], ascending."""
    if n < 2:
        raise SamplingError(f"Need at least 2 points, got {n}")
    if not lo < hi:
        raise SamplingError(f"Empty interval [{lo}, {hi}]")
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    j = np.arange(n)
    # sine form is exactly antisymmetric about the midpoint
    t = np.sin(np.pi * (2 * j - (n - 1)) / (2 * (n - 1)))
    pts = mid + half * t
    pts[0] = lo
    pts[-1] = hi
    return pts.tolist()


def axis_values(axis: AxisSpec) -> List[float]:
    if axis.values is not None:
        return list(axis.values)
    return chebyshev_points(axis.min, axis.max, axis.count)


@dataclass(frozen=True)
class SamplingPlan:
    """Tensor grid of samples, with the raw axis values kept alongside."""

    axes: Tuple[AxisSpec, ...]
    samples: Tuple[Tuple[float, ...], ...]
    points: Tuple[ParameterPoint, ...]

    def __len__(self) -> int:
        return len(self.points)

    @property
    def axis_names(self) -> List[str]:
        return [a.name for a in self.axes]


def _to_point(
    names: Sequence[str],
    values: Sequence[float],
    fixed_lambda: Optional[float],
    mean_velocity: float,
    channel_height: float,
) -> ParameterPoint:
    v = dict(zip(names, values))
    if "lambda" in v:
        lam = v["lambda"]
    elif "width" in v:
        lam = channel_height / v["width"]
    elif fixed_lambda is not None:
        lam = fixed_lambda
    else:
        raise SamplingError("No expansion ratio: add a 'lambda'/'width' axis or a fixed lambda")
    if "re" in v:
        re = v["re"]
    elif "nu" in v:
        re = reynolds_for(v["nu"], lam, mean_velocity, channel_height)
    else:
        raise SamplingError("No Reynolds number: add an 're' or 'nu' axis")
    try:
        return ParameterPoint(re=re, lam=lam)
    except GeometryError as e:
        raise SamplingError(f"Sample {v} maps outside parameter space: {e}")


def tensor_plan(
    axes: Sequence[AxisSpec],
    fixed_lambda: Optional[float] = None,
    mean_velocity: float = 1.0,
    channel_height: float = 1.0,
) -> SamplingPlan:
    """Cartesian product of the axis samples, first axis outermost."""
    if not axes:
        raise SamplingError("At least one sampling axis is required")
    if len(axes) > 2:
        raise SamplingError(f"At most two axes are supported, got {len(axes)}")
    names = [a.name for a in axes]
    if len(set(names)) != len(names):
        raise SamplingError(f"Duplicate axis names: {names}")
    grids = [axis_values(a) for a in axes]
    samples = tuple(itertools.product(*grids))
    points = tuple(
        _to_point(names, s, fixed_lambda, mean_velocity, channel_height) for s in samples
    )
    return SamplingPlan(axes=tuple(axes), samples=samples, points=points)


def viscosity_width_plan(mean_velocity: float = STUDY_MEAN_VELOCITY) -> SamplingPlan:
    """The 6 x 7 viscosity / expansion-ratio training set of the width study."""
    axes = [
        AxisSpec(name="nu", min=STUDY_VISCOSITIES[0], max=STUDY_VISCOSITIES[-1],
                 count=len(STUDY_VISCOSITIES), values=STUDY_VISCOSITIES),
        AxisSpec(name="lambda", min=STUDY_EXPANSION_RATIOS[0], max=STUDY_EXPANSION_RATIOS[-1],
                 count=len(STUDY_EXPANSION_RATIOS), values=STUDY_EXPANSION_RATIOS),
    ]
    return tensor_plan(axes, mean_velocity=mean_velocity)


def manifest(plan: SamplingPlan) -> str:
    """CSV manifest: index, raw axis values (``axis:<name>``), derived Re and lambda."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["index", *(f"axis:{n}" for n in plan.axis_names), "re", "lambda"])
    for i, (sample, point) in enumerate(zip(plan.samples, plan.points)):
        writer.writerow([i, *(repr(float(s)) for s in sample), repr(point.re), repr(point.lam)])
    return buf.getvalue()


def parse_manifest(text: str) -> List[Tuple[Dict[str, float], ParameterPoint]]:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for row in reader:
        axes = {k[len("axis:"):]: float(v) for k, v in row.items() if k.startswith("axis:")}
        rows.append((axes, ParameterPoint(re=float(row["re"]), lam=float(row["lambda"]))))
    return rows
