# src/rombif_mcp/config.py
"""Campaign configuration models and their INI file form."""

import configparser
import io
from enum import Enum
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .geometry import GeometryMode


class Parity(str, Enum):
    NONE = "None"
    ANTISYMMETRIC = "Antisymmetric"


class BranchPolicy(str, Enum):
    STABLE_ONLY = "StableOnly"
    MIXED_BRANCHES = "MixedBranches"
    UNSTABLE_ONLY = "UnstableOnly"


class ConstraintMode(str, Enum):
    SINGLE = "Single"
    SPLIT_INLET = "SplitInlet"


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class PerturbationConfig(_Frozen):
    amplitude: float = Field(default=1e-3, ge=0)
    seed: int = 0
    parity: Parity = Parity.NONE
    sign: int = 1

    @model_validator(mode="after")
    def _check_sign(self) -> "PerturbationConfig":
        if self.sign not in (-1, 1):
            raise ValueError("perturbation sign must be +1 or -1")
        return self


class FomConfig(_Frozen):
    pseudo_time_step_safety: float = Field(default=0.5, gt=0, le=1)
    stop_tolerance: float = Field(default=1e-8, gt=0)
    max_steps: int = Field(default=5000, ge=1)
    max_pseudo_step: float = Field(default=1e4, gt=0)
    branch_pseudo_step: float = Field(default=10.0, gt=0)
    blend_start: float = Field(default=1e-2, gt=0)
    blend_end: float = Field(default=1e-4, gt=0)
    asymmetry_threshold: float = Field(default=1e-3, gt=0)
    mean_velocity: float = Field(default=1.0, gt=0)
    perturbation: PerturbationConfig = PerturbationConfig()

    @model_validator(mode="after")
    def _check_blend(self) -> "FomConfig":
        if self.blend_end >= self.blend_start:
            raise ValueError("blend_end must be below blend_start")
        return self


class AxisSpec(_Frozen):
    """One sampling axis; ``values`` overrides the Chebyshev points."""

    name: Literal["re", "lambda", "nu", "width"]
    min: float
    max: float
    count: int = Field(ge=2)
    values: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check_range(self) -> "AxisSpec":
        if not self.min < self.max:
            raise ValueError(f"axis {self.name}: min must be below max")
        if self.values is not None:
            if len(self.values) != self.count:
                raise ValueError(f"axis {self.name}: {len(self.values)} values but count={self.count}")
            if any(b <= a for a, b in zip(self.values, self.values[1:])):
                raise ValueError(f"axis {self.name}: values must be strictly ascending")
        return self


class GeometrySpec(_Frozen):
    mode: GeometryMode = GeometryMode.FULL_CHANNEL
    channel_height: float = Field(default=1.0, gt=0)
    resolution: float = Field(default=155.0, gt=0)
    streamwise_resolution: Optional[float] = Field(default=None, gt=0)
    fixed_lambda: Optional[float] = Field(default=None, ge=1)


class BasisSpec(_Frozen):
    method: Literal["pod", "gram_schmidt"] = "pod"
    n_modes: Optional[int] = Field(default=None, ge=1)
    energy: Optional[float] = Field(default=None, gt=0, le=1)
    policy: BranchPolicy = BranchPolicy.STABLE_ONLY
    mirror_augment: bool = True


class OnlineSpec(_Frozen):
    tol: float = Field(default=1e-10, gt=0)
    max_iter: int = Field(default=200, ge=1)
    relaxation: float = Field(default=0.7, gt=0, le=1)
    constraint_mode: ConstraintMode = ConstraintMode.SINGLE
    probes: List[float] = Field(default_factory=lambda: [1.0])


class CampaignConfig(_Frozen):
    name: str = "campaign"
    output: str = "campaign.rombif"
    workers: int = Field(default=1, ge=1)
    geometry: GeometrySpec = GeometrySpec()
    axes: List[AxisSpec] = Field(min_length=1, max_length=2)
    fom: FomConfig = FomConfig()
    basis: BasisSpec = BasisSpec()
    online: OnlineSpec = OnlineSpec()

    @model_validator(mode="after")
    def _check_axes(self) -> "CampaignConfig":
        names = [a.name for a in self.axes]
        flow = [n for n in names if n in ("re", "nu")]
        shape = [n for n in names if n in ("lambda", "width")]
        if len(flow) != 1:
            raise ValueError("exactly one of the axes 're' or 'nu' is required")
        if len(shape) > 1:
            raise ValueError("at most one of the axes 'lambda' or 'width' is allowed")
        if not shape and self.geometry.fixed_lambda is None:
            raise ValueError("a single-axis campaign needs geometry.fixed_lambda")
        return self


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_format(v) for v in value)
    return str(value)


def _section_items(model: BaseModel, skip: tuple = ()) -> Dict[str, str]:
    items = {}
    for key in type(model).model_fields:
        if key in skip:
            continue
        value = getattr(model, key)
        if value is None:
            continue
        items[key] = _format(value)
    return items


def dump_config(config: CampaignConfig) -> str:
    """Serialize to canonical INI text (schema key order, repr floats)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["campaign"] = _section_items(config, skip=("geometry", "axes", "fom", "basis", "online"))
    parser["geometry"] = _section_items(config.geometry)
    for axis in config.axes:
        parser[f"axis:{axis.name}"] = _section_items(axis, skip=("name",))
    fom = _section_items(config.fom, skip=("perturbation",))
    for key, value in _section_items(config.fom.perturbation).items():
        fom[f"perturbation_{key}"] = value
    parser["fom"] = fom
    parser["basis"] = _section_items(config.basis)
    parser["online"] = _section_items(config.online)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _parse_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def load_config(text: str) -> CampaignConfig:
    """Parse and validate campaign INI text."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"Malformed configuration: {e}")

    data: Dict[str, Any] = {"axes": []}
    if parser.has_section("campaign"):
        data.update(dict(parser["campaign"]))
    for section in parser.sections():
        body = dict(parser[section])
        if section.startswith("axis:"):
            if "values" in body:
                body["values"] = _parse_list(body["values"])
            data["axes"].append({"name": section.split(":", 1)[1], **body})
        elif section == "fom":
            pert = {k[len("perturbation_"):]: v for k, v in body.items() if k.startswith("perturbation_")}
            fom = {k: v for k, v in body.items() if not k.startswith("perturbation_")}
            if pert:
                fom["perturbation"] = pert
            data["fom"] = fom
        elif section == "online":
            if "probes" in body:
                body["probes"] = _parse_list(body["probes"])
            data["online"] = body
        elif section in ("geometry", "basis"):
            data[section] = body
        elif section != "campaign":
            raise ConfigError(f"Unknown configuration section [{section}]")
    try:
        return CampaignConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}")


def load_config_file(path: str) -> CampaignConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return load_config(f.read())
    except OSError as e:
        raise ConfigError(f"Cannot read configuration {path}: {e}")
