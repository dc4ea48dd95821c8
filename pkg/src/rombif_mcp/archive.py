# src/rombif_mcp/archive.py
"""Checksummed binary archive of snapshots, basis and reduced operators.

Layout: the magic line ``ROMBIF1\\n``, a little-endian uint64 header length,
the header as sorted-key JSON, then the payload sections back to back as
little-endian float64 arrays. Every section carries its byte count and a
CRC-32 in the header table.
"""

import json
import logging
import os
import struct
import tempfile
import zlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .basis import ReducedBasis
from .config import CampaignConfig, dump_config, load_config
from .costs import CostLedger
from .errors import ArchiveCorruptionError, ArchiveError
from .fom import Branch, Snapshot, VelocityField
from .geometry import GeometryMode, Grid, ParameterPoint, build_geometry, build_grid
from .rom import ReducedOperators

logger = logging.getLogger(__name__)

MAGIC = b"ROMBIF1\n"
FORMAT_VERSION = 1
_LENGTH = struct.Struct("<Q")


def _header_bytes(header: Dict[str, Any]) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _raw(array: np.ndarray) -> bytes:
    return np.ascontiguousarray(array, dtype="<f8").tobytes()


@dataclass(eq=False)
class ArchiveFile:
    """Header dict plus named float64 sections, in write order."""

    header: Dict[str, Any]
    sections: Dict[str, np.ndarray] = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        table = []
        payloads = []
        offset = 0
        for name, array in self.sections.items():
            raw = _raw(array)
            table.append({
                "name": name,
                "shape": list(np.shape(array)),
                "offset": offset,
                "nbytes": len(raw),
                "crc32": zlib.crc32(raw),
            })
            payloads.append(raw)
            offset += len(raw)
        header = dict(self.header, version=FORMAT_VERSION, sections=table)
        head = _header_bytes(header)
        return MAGIC + _LENGTH.pack(len(head)) + head + b"".join(payloads)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ArchiveFile":
        header, start = _parse_header(data, len(data))
        sections = {}
        for entry in header["sections"]:
            raw = data[start + entry["offset"]: start + entry["offset"] + entry["nbytes"]]
            sections[entry["name"]] = _decode(entry, raw)
        header = {k: v for k, v in header.items() if k not in ("sections", "version")}
        return cls(header, sections)


def _parse_header(prefix: bytes, file_size: int):
    if prefix[: len(MAGIC)] != MAGIC:
        raise ArchiveCorruptionError("Not a rombif archive (bad magic)")
    pos = len(MAGIC)
    if len(prefix) < pos + _LENGTH.size:
        raise ArchiveCorruptionError("Archive truncated inside the header length")
    (length,) = _LENGTH.unpack_from(prefix, pos)
    pos += _LENGTH.size
    if len(prefix) < pos + length:
        raise ArchiveCorruptionError("Archive truncated inside the header")
    try:
        header = json.loads(prefix[pos: pos + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ArchiveCorruptionError(f"Archive header is not valid JSON: {e}")
    if header.get("version") != FORMAT_VERSION:
        raise ArchiveError(f"Unsupported archive version {header.get('version')}")
    start = pos + length
    declared = sum(entry["nbytes"] for entry in header.get("sections", []))
    if file_size - start != declared:
        raise ArchiveCorruptionError(
            f"Payload is {file_size - start} bytes but the header declares {declared}"
        )
    return header, start


def _decode(entry: Dict[str, Any], raw: bytes) -> np.ndarray:
    name = entry["name"]
    if len(raw) != entry["nbytes"]:
        raise ArchiveCorruptionError(
            f"Section '{name}' has {len(raw)} bytes, header declares {entry['nbytes']}"
        )
    if zlib.crc32(raw) != entry["crc32"]:
        raise ArchiveCorruptionError(f"Checksum mismatch in section '{name}'")
    count = int(np.prod(entry["shape"])) if entry["shape"] else 1
    if count * 8 != len(raw):
        raise ArchiveCorruptionError(f"Section '{name}' shape {entry['shape']} does not match its size")
    return np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).astype(float)


def write_archive(path: Union[str, Path], archive: ArchiveFile) -> Path:
    """Write atomically: temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = archive.to_bytes()
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except OSError as e:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise ArchiveError(f"Cannot write archive {path}: {e}")
    logger.info(f"Wrote archive {path} ({len(data)} bytes, {len(archive.sections)} sections)")
    return path


def _snapshot_entry(index: int, snap: Snapshot) -> Dict[str, Any]:
    metadata = {k: v for k, v in snap.metadata.items() if k != "wall_time"}
    return {
        "id": index,
        "parameter": snap.parameter.as_dict(),
        "branch": snap.branch.value,
        "convergence_residual": float(snap.convergence_residual),
        "iterations": int(snap.iterations),
        "metadata": metadata,
    }


def build_archive(
    grid: Grid,
    snapshots: Optional[Sequence[Snapshot]] = None,
    basis: Optional[ReducedBasis] = None,
    ops: Optional[ReducedOperators] = None,
    config: Optional[CampaignConfig] = None,
    manifest: str = "",
    skipped: Sequence[Dict[str, Any]] = (),
    run_info: Optional[Dict[str, Any]] = None,
) -> ArchiveFile:
    """Assemble an archive. Any of snapshots, basis and operators may be left out.

    Timings and timestamps go only into ``run_info``.
    """
    header: Dict[str, Any] = {
        "format": "rombif",
        "grid": grid.spec(),
        "grid_dims": {"nx": grid.nx, "ny": grid.ny, "size": grid.size},
        "config": dump_config(config) if config is not None else None,
        "manifest": manifest,
        "skipped": list(skipped),
        "run_info": dict(run_info or {}),
    }
    sections: Dict[str, np.ndarray] = {}

    entries = []
    wall_times = []
    for k, snap in enumerate(snapshots or []):
        entries.append(_snapshot_entry(k, snap))
        wall_times.append(snap.metadata.get("wall_time"))
        sections[f"snapshots/{k:04d}"] = snap.field.data
    header["snapshots"] = entries
    if wall_times:
        header["run_info"]["snapshot_wall_times"] = wall_times

    if basis is not None:
        header["basis"] = {"size": basis.size, "source": basis.source}
        sections["basis/modes"] = basis.matrix.T
        sections["basis/energies"] = basis.energies
        if basis.spectrum is not None:
            sections["basis/spectrum"] = basis.spectrum

    if ops is not None:
        header["operators"] = {
            "size": ops.size,
            "domain_length": ops.domain_length,
            "channel_height": ops.channel_height,
            "mean_velocity": ops.mean_velocity,
            "mode": ops.mode.value,
            "inlet_dy": ops.inlet_dy,
            "probes": list(ops.probes),
            "training": [p.as_dict() for p, _ in ops.training],
        }
        sections["operators/diffusion"] = ops.diffusion
        sections["operators/convection"] = ops.convection
        sections["operators/flowrate"] = ops.flowrate
        sections["operators/inlet_traces"] = ops.inlet_traces
        sections["operators/inlet_y"] = ops.inlet_y
        sections["operators/mirror_gram"] = ops.mirror_gram
        if ops.jet_moments is not None:
            sections["operators/jet_moments"] = ops.jet_moments
        for name, values in ops.probes.items():
            sections[f"operators/probes/{name}"] = values
        if ops.training:
            sections["operators/training"] = np.vstack([a for _, a in ops.training])
    return ArchiveFile(header, sections)


class ArchiveReader:
    """Lazy, read-only view of one archive file.

    Sections are read from disk on demand; ``reads`` counts every payload
    access by section name.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        try:
            size = self.path.stat().st_size
            with open(self.path, "rb") as f:
                prefix = f.read(len(MAGIC) + _LENGTH.size)
                if len(prefix) == len(MAGIC) + _LENGTH.size and prefix[: len(MAGIC)] == MAGIC:
                    (length,) = _LENGTH.unpack_from(prefix, len(MAGIC))
                    prefix += f.read(length)
        except OSError as e:
            raise ArchiveError(f"Cannot open archive {self.path}: {e}")
        self.header, self._start = _parse_header(prefix, size)
        self._table = {entry["name"]: entry for entry in self.header["sections"]}
        self.reads: Counter = Counter()
        self._grids: Dict[float, Grid] = {}
        self._ops: Optional[ReducedOperators] = None
        self._basis: Optional[ReducedBasis] = None
        self.ledger = CostLedger.from_dict(self.header.get("run_info", {}).get("ledger", {}))

    @property
    def section_names(self) -> List[str]:
        return list(self._table)

    def has_section(self, name: str) -> bool:
        return name in self._table

    def section(self, name: str) -> np.ndarray:
        if name not in self._table:
            raise ArchiveError(f"Archive {self.path.name} has no section '{name}'")
        entry = self._table[name]
        with open(self.path, "rb") as f:
            f.seek(self._start + entry["offset"])
            raw = f.read(entry["nbytes"])
        self.reads[name] += 1
        return _decode(entry, raw)

    def snapshot_reads(self) -> int:
        return sum(n for name, n in self.reads.items() if name.startswith("snapshots/"))

    def config(self) -> Optional[CampaignConfig]:
        text = self.header.get("config")
        return load_config(text) if text else None

    def grid(self, lam: Optional[float] = None) -> Grid:
        """The basis grid, or the grid of the same family built for ``lam``."""
        spec = self.header["grid"]
        geom_spec = spec["geometry"]
        lam = float(geom_spec["lambda"]) if lam is None else float(lam)
        if lam not in self._grids:
            geom = build_geometry(lam, float(geom_spec["channel_height"]), GeometryMode(geom_spec["mode"]))
            self._grids[lam] = build_grid(geom, spec["resolution"], spec["streamwise_resolution"])
        return self._grids[lam]

    def operators(self) -> ReducedOperators:
        if self._ops is not None:
            return self._ops
        meta = self.header.get("operators")
        if meta is None:
            raise ArchiveError(f"Archive {self.path.name} holds no reduced operators")
        training = []
        if meta["training"]:
            coeffs = self.section("operators/training")
            training = [(ParameterPoint.from_dict(p), coeffs[i]) for i, p in enumerate(meta["training"])]
        jets = self.section("operators/jet_moments") if self.has_section("operators/jet_moments") else None
        self._ops = ReducedOperators(
            diffusion=self.section("operators/diffusion"),
            convection=self.section("operators/convection"),
            flowrate=self.section("operators/flowrate"),
            inlet_traces=self.section("operators/inlet_traces"),
            inlet_y=self.section("operators/inlet_y"),
            inlet_dy=float(meta["inlet_dy"]),
            mirror_gram=self.section("operators/mirror_gram"),
            domain_length=float(meta["domain_length"]),
            channel_height=float(meta["channel_height"]),
            mean_velocity=float(meta["mean_velocity"]),
            mode=GeometryMode(meta["mode"]),
            probes={name: self.section(f"operators/probes/{name}") for name in meta["probes"]},
            training=training,
            jet_moments=jets,
        )
        return self._ops

    def basis(self) -> ReducedBasis:
        if self._basis is not None:
            return self._basis
        meta = self.header.get("basis")
        if meta is None:
            raise ArchiveError(f"Archive {self.path.name} holds no basis")
        spectrum = self.section("basis/spectrum") if self.has_section("basis/spectrum") else None
        self._basis = ReducedBasis(
            grid=self.grid(),
            matrix=np.ascontiguousarray(self.section("basis/modes").T),
            energies=self.section("basis/energies"),
            source=meta["source"],
            spectrum=spectrum,
        )
        return self._basis

    def snapshots(self) -> List[Snapshot]:
        out = []
        for entry in self.header.get("snapshots", []):
            p = ParameterPoint.from_dict(entry["parameter"])
            data = self.section(f"snapshots/{entry['id']:04d}")
            out.append(Snapshot(
                field=VelocityField(self.grid(p.lam), data),
                parameter=p,
                branch=Branch(entry["branch"]),
                convergence_residual=entry["convergence_residual"],
                iterations=entry["iterations"],
                metadata=dict(entry["metadata"]),
            ))
        return out

    def training_hull(self) -> Optional[Dict[str, List[float]]]:
        meta = self.header.get("operators") or {}
        pts = meta.get("training") or [e["parameter"] for e in self.header.get("snapshots", [])]
        if not pts:
            return None
        re = [p["re"] for p in pts]
        lam = [p["lambda"] for p in pts]
        return {"re": [min(re), max(re)], "lambda": [min(lam), max(lam)]}

    def to_archive_file(self) -> ArchiveFile:
        header = {k: v for k, v in self.header.items() if k not in ("sections", "version")}
        return ArchiveFile(header, {name: self.section(name) for name in self._table})

    def describe(self) -> Dict[str, Any]:
        """Header summary; reads no payload."""
        branches = Counter(e["branch"] for e in self.header.get("snapshots", []))
        ops = self.header.get("operators") or {}
        return {
            "path": str(self.path),
            "version": self.header["version"],
            "grid": self.header["grid"],
            "grid_dims": self.header["grid_dims"],
            "snapshot_count": len(self.header.get("snapshots", [])),
            "branches": dict(sorted(branches.items())),
            "skipped": self.header.get("skipped", []),
            "basis": self.header.get("basis"),
            "operator_size": ops.get("size"),
            "probes": ops.get("probes", []),
            "training_hull": self.training_hull(),
            "sections": [
                {"name": e["name"], "shape": e["shape"], "nbytes": e["nbytes"]}
                for e in self.header["sections"]
            ],
            "run_info": self.header.get("run_info", {}),
        }


class ArchiveClient:
    """Resolves archive paths under a base directory and caches open readers."""

    def __init__(self, base_dir: Optional[Union[str, Path]] = None, caching: bool = True):
        self.base_dir = Path(base_dir or os.environ.get("ROMBIF_ARCHIVE_DIR", "."))
        self.caching = caching
        self._cache: Dict[Path, tuple] = {}

    def resolve(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        return path if path.is_absolute() else self.base_dir / path

    def open(self, path: Union[str, Path]) -> ArchiveReader:
        resolved = self.resolve(path)
        try:
            stamp = (resolved.stat().st_mtime_ns, resolved.stat().st_size)
        except OSError as e:
            raise ArchiveError(f"Archive not found: {resolved} ({e})")
        cached = self._cache.get(resolved)
        if self.caching and cached is not None and cached[0] == stamp:
            return cached[1]
        reader = ArchiveReader(resolved)
        if self.caching:
            self._cache[resolved] = (stamp, reader)
        return reader

    def write(self, path: Union[str, Path], archive: ArchiveFile) -> Path:
        resolved = self.resolve(path)
        self._cache.pop(resolved, None)
        return write_archive(resolved, archive)

    def read_counts(self, path: Union[str, Path]) -> Dict[str, int]:
        cached = self._cache.get(self.resolve(path))
        return dict(cached[1].reads) if cached else {}
