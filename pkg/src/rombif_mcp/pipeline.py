# src/rombif_mcp/pipeline.py
"""Offline campaigns and archive-backed online work."""

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .archive import ArchiveClient, ArchiveFile, ArchiveReader, build_archive
from .basis import ReducedBasis, gram_schmidt, pod, select_snapshots
from .config import CampaignConfig, FomConfig, GeometrySpec, OnlineSpec
from .costs import CostLedger, report_costs
from .errors import CampaignError, FomConvergenceError
from .fom import Snapshot, VelocityField, find_both_branches
from .geometry import GeometryMode, ParameterPoint, build_geometry, build_grid
from .operators import probe_matrix
from .rom import (
    ReducedOperators,
    ReducedSolution,
    antisymmetric_seed,
    assemble_offline,
    branch_label,
    nearest_training_guess,
    probe,
    probe_name,
    reduced_asymmetry,
    solve_with_spec,
)
from .sampling import SamplingPlan, manifest, tensor_plan
from .stability import BifurcationResult, DetectOptions, Variant, detect_bifurcation

logger = logging.getLogger(__name__)

DIAGRAM_SEED_AMPLITUDE = 1e-2


def _solve_sample(job: Tuple[int, ParameterPoint, GeometrySpec, FomConfig]):
    """One training point: both branches, or the failure message."""
    index, p, geometry, fom = job
    geom = build_geometry(p.lam, geometry.channel_height, geometry.mode)
    grid = build_grid(geom, geometry.resolution, geometry.streamwise_resolution)
    started = time.perf_counter()
    try:
        snaps = find_both_branches(geom, grid, p, fom)
    except FomConvergenceError as e:
        return index, None, str(e), time.perf_counter() - started
    return index, snaps, None, time.perf_counter() - started


def _check_survivors(plan: SamplingPlan, survivors: Sequence[int]) -> None:
    for a, name in enumerate(plan.axis_names):
        values = {plan.samples[i][a] for i in survivors}
        if len(values) < 2:
            raise CampaignError(
                f"Only {len(values)} distinct '{name}' values survived the offline solves; need 2"
            )


def _with_seed(config: CampaignConfig, seed: Optional[int]) -> CampaignConfig:
    if seed is None:
        return config
    pert = config.fom.perturbation.model_copy(update={"seed": int(seed)})
    fom = config.fom.model_copy(update={"perturbation": pert})
    return config.model_copy(update={"fom": fom})


@dataclass(eq=False)
class OfflineResult:
    path: Path
    archive: ArchiveFile
    snapshots: List[Snapshot]
    basis: ReducedBasis
    ops: ReducedOperators
    ledger: CostLedger
    skipped: List[Dict[str, Any]] = field(default_factory=list)

    def summary(self) -> Dict[str, Any]:
        branches: Dict[str, int] = {}
        for s in self.snapshots:
            branches[s.branch.value] = branches.get(s.branch.value, 0) + 1
        return {
            "archive": str(self.path),
            "snapshot_count": len(self.snapshots),
            "branches": dict(sorted(branches.items())),
            "skipped": self.skipped,
            "basis_size": self.basis.size,
            "basis_method": self.basis.source.get("method"),
            "probes": list(self.ops.probes),
            "offline_time": self.ledger.offline_time,
        }


def run_offline(
    config: CampaignConfig,
    client: Optional[ArchiveClient] = None,
    output: Optional[Union[str, Path]] = None,
    workers: Optional[int] = None,
    seed: Optional[int] = None,
) -> OfflineResult:
    """Sample, solve, build the basis and operators, and write the archive."""
    client = client or ArchiveClient()
    config = _with_seed(config, seed)
    workers = workers or config.workers
    geometry = config.geometry
    names = [a.name for a in config.axes]
    if geometry.mode == GeometryMode.FULL_CHANNEL and ({"lambda", "width"} & set(names)):
        raise CampaignError("An expansion-ratio axis needs ExpansionOnly geometry (one grid for all samples)")

    plan = tensor_plan(
        config.axes,
        fixed_lambda=geometry.fixed_lambda,
        mean_velocity=config.fom.mean_velocity,
        channel_height=geometry.channel_height,
    )
    logger.info(f"Campaign '{config.name}': {len(plan)} samples on {workers} worker(s)")
    jobs = [(i, p, geometry, config.fom) for i, p in enumerate(plan.points)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_sample, jobs))
    else:
        results = [_solve_sample(job) for job in jobs]

    ledger = CostLedger()
    snapshots: List[Snapshot] = []
    skipped: List[Dict[str, Any]] = []
    survivors: List[int] = []
    for index, snaps, error, elapsed in sorted(results, key=lambda r: r[0]):
        if snaps is None:
            logger.warning(f"Skipping sample {index} ({plan.points[index].as_dict()}): {error}")
            skipped.append({"index": index, "parameter": plan.points[index].as_dict(), "reason": error})
            continue
        survivors.append(index)
        snapshots.extend(snaps)
        ledger.snapshot_times.append(elapsed)
    _check_survivors(plan, survivors)

    started = time.perf_counter()
    fields, ids = select_snapshots(snapshots, config.basis.policy, config.basis.mirror_augment)
    if config.basis.method == "pod":
        basis = pod(fields, n_modes=config.basis.n_modes, energy=config.basis.energy, ids=ids)
    else:
        basis = gram_schmidt(fields, ids=ids)
        if config.basis.n_modes is not None and config.basis.n_modes < basis.size:
            basis = basis.truncate(config.basis.n_modes)
    ledger.basis_time = time.perf_counter() - started

    started = time.perf_counter()
    training = [(s.parameter, s.field) for s in snapshots if s.branch.is_stable]
    ops = assemble_offline(basis, config.online.probes, training, config.fom.mean_velocity)
    ledger.assembly_time = time.perf_counter() - started

    run_info = {
        "created": datetime.now(timezone.utc).isoformat(),
        "workers": workers,
        "ledger": ledger.to_dict(),
    }
    archive = build_archive(
        basis.grid,
        snapshots=snapshots,
        basis=basis,
        ops=ops,
        config=config,
        manifest=manifest(plan),
        skipped=skipped,
        run_info=run_info,
    )
    path = client.write(output or config.output, archive)
    return OfflineResult(path, archive, snapshots, basis, ops, ledger, skipped)


def _online_spec(reader: ArchiveReader) -> Tuple[OnlineSpec, float]:
    config = reader.config()
    if config is None:
        return OnlineSpec(), FomConfig().asymmetry_threshold
    return config.online, config.fom.asymmetry_threshold


@dataclass(eq=False)
class QueryResult:
    solution: ReducedSolution
    probes: Dict[str, Tuple[float, float]]
    asymmetry: float
    branch: str
    extrapolated: bool
    wall_time: float
    field: Optional[VelocityField] = None

    def summary(self) -> Dict[str, Any]:
        out = {
            "parameter": self.solution.parameter.as_dict(),
            "coefficients": self.solution.coefficients.tolist(),
            "multipliers": self.solution.multipliers,
            "iterations": self.solution.iterations,
            "final_residual": self.solution.final_residual,
            "probes": {name: {"u": u, "v": v} for name, (u, v) in self.probes.items()},
            "reduced_asymmetry": self.asymmetry,
            "branch": self.branch,
            "extrapolated": self.extrapolated,
            "wall_time": self.wall_time,
        }
        if self.field is not None:
            out["field"] = {
                "norm": self.field.norm(),
                "max_divergence": float(np.max(np.abs(self.field.divergence()))),
            }
        return out


def _outside_hull(reader: ArchiveReader, p: ParameterPoint) -> bool:
    hull = reader.training_hull()
    if hull is None:
        return False
    return not (
        hull["re"][0] <= p.re <= hull["re"][1] and hull["lambda"][0] <= p.lam <= hull["lambda"][1]
    )


def query_online(
    reader: ArchiveReader,
    p: ParameterPoint,
    spec: Optional[OnlineSpec] = None,
    reconstruct: bool = False,
    symmetric: bool = False,
) -> QueryResult:
    """Online solve at ``p`` from the archived operators alone.

    Snapshot payloads are never read; ``reconstruct`` reads the basis modes.
    """
    default_spec, threshold = _online_spec(reader)
    spec = spec or default_spec
    extrapolated = _outside_hull(reader, p)
    if extrapolated:
        logger.warning(f"Re={p.re:g}, lambda={p.lam:g} lies outside the trained parameter range")
    started = time.perf_counter()
    ops = reader.operators()
    sol = solve_with_spec(ops, p, spec, symmetric=symmetric)
    probes = {name: probe(ops, sol.coefficients, name) for name in ops.probes}
    elapsed = time.perf_counter() - started
    reader.ledger.record_query(elapsed)

    result = QueryResult(
        solution=sol,
        probes=probes,
        asymmetry=reduced_asymmetry(ops, sol.coefficients),
        branch=branch_label(ops, sol.coefficients, threshold),
        extrapolated=extrapolated,
        wall_time=elapsed,
    )
    if reconstruct:
        basis = reader.basis()
        result.field = VelocityField(reader.grid(p.lam), basis.matrix @ sol.coefficients)
    return result


def _timed_detect(reader, ops, lam, re_range, delta_re, variant, options) -> BifurcationResult:
    started = time.perf_counter()
    result = detect_bifurcation(None, ops, lam, re_range, delta_re, variant, options)
    reader.ledger.record_detection(time.perf_counter() - started)
    return result


def detect(
    reader: ArchiveReader,
    lam: float,
    re_range: Optional[Tuple[float, float]] = None,
    delta_re: Optional[float] = None,
    variant: Variant = Variant.FULL_JACOBIAN,
    options: Optional[DetectOptions] = None,
) -> BifurcationResult:
    """Bifurcation sweep at fixed ``lam``; the Re range defaults to the trained one."""
    spec, _ = _online_spec(reader)
    options = options or DetectOptions(
        constraint_mode=spec.constraint_mode, tol=spec.tol,
        max_iter=spec.max_iter, relaxation=spec.relaxation,
    )
    if re_range is None:
        hull = reader.training_hull()
        if hull is None:
            raise CampaignError("Archive has no training points; give an explicit Re range")
        re_range = tuple(hull["re"])
    return _timed_detect(reader, reader.operators(), lam, re_range, delta_re, variant, options)


def detect_many(
    reader: ArchiveReader,
    lams: Sequence[float],
    re_range: Optional[Tuple[float, float]] = None,
    delta_re: Optional[float] = None,
    variant: Variant = Variant.FULL_JACOBIAN,
    options: Optional[DetectOptions] = None,
    workers: int = 1,
) -> List[BifurcationResult]:
    """Independent sweeps for several expansion ratios, in input order."""
    reader.operators()
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(detect, reader, lam, re_range, delta_re, variant, options) for lam in lams]
        return [f.result() for f in futures]


def _probe_columns(reader: ArchiveReader, ops: ReducedOperators, lam: float, x: float) -> np.ndarray:
    name = probe_name(x)
    if name in ops.probes:
        return ops.probes[name]
    basis = reader.basis()
    grid = reader.grid(lam)
    return (probe_matrix(grid, grid.geometry.expansion_x + x, 0.0) @ basis.matrix).T


def diagram_csv(rows: Sequence[Dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["re", "u_y", "branch"])
    for row in rows:
        writer.writerow([repr(float(row["re"])), repr(float(row["u_y"])), row["branch"]])
    return buf.getvalue()


def bifurcation_diagram(
    reader: ArchiveReader,
    lam: float,
    re_values: Sequence[float],
    probe_x: float = 1.0,
    include_unstable: bool = False,
    sign: int = 1,
    spec: Optional[OnlineSpec] = None,
) -> Dict[str, Any]:
    """Transverse velocity on the axis at ``probe_x`` past the expansion, per Re.

    Each point starts from the previous solution plus a small antisymmetric
    kick toward the ``sign`` side, so the stable branch is selected.
    """
    if sign not in (-1, 1):
        raise CampaignError(f"Branch sign must be +1 or -1, got {sign}")
    default_spec, threshold = _online_spec(reader)
    spec = spec or default_spec
    ops = reader.operators()
    columns = _probe_columns(reader, ops, lam, probe_x)
    re_values = sorted(float(r) for r in re_values)
    a_prev = nearest_training_guess(ops, ParameterPoint(re=re_values[0], lam=lam))
    rows = []
    for re in re_values:
        p = ParameterPoint(re=re, lam=lam)
        a0 = antisymmetric_seed(ops, a_prev, DIAGRAM_SEED_AMPLITUDE, sign)
        sol = solve_with_spec(ops, p, spec, a0=a0)
        a_prev = sol.coefficients
        label = branch_label(ops, sol.coefficients, threshold)
        rows.append({"re": re, "u_y": float(columns[:, 1] @ sol.coefficients), "branch": label})
        if include_unstable and label != "Symmetric":
            sym = solve_with_spec(ops, p, spec, a0=sol.coefficients, symmetric=True)
            rows.append({"re": re, "u_y": float(columns[:, 1] @ sym.coefficients), "branch": "Unstable"})
    return {
        "rows": rows,
        "csv": diagram_csv(rows),
        "metadata": {
            "lambda": lam,
            "probe": {"x_from_expansion": probe_x, "y": 0.0, "unit": "channel height"},
            "include_unstable": include_unstable,
            "sign": sign,
        },
    }


def costs(
    reader: ArchiveReader, detections: Optional[int] = None, runs_per_detection: Optional[int] = None
) -> Dict[str, Any]:
    """Cost report from the archive ledger.

    Offline figures come from the archive. Query and detection timings are
    kept in memory on the reader and are not written back, so online
    figures cover the current process only.
    """
    kwargs = {} if runs_per_detection is None else {"runs_per_detection": runs_per_detection}
    report = report_costs(reader.ledger, detections, **kwargs)
    report["offline_source"] = "archive"
    report["online_source"] = "current process"
    return report
