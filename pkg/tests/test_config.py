# tests/test_config.py
"""Tests for campaign configuration and its INI form."""

import pytest

from rombif_mcp.config import (
    AxisSpec,
    BranchPolicy,
    CampaignConfig,
    ConstraintMode,
    FomConfig,
    Parity,
    PerturbationConfig,
    dump_config,
    load_config,
    load_config_file,
)
from rombif_mcp.errors import ConfigError
from rombif_mcp.geometry import GeometryMode

STUDY_INI = """
[campaign]
name = lambda-15.4
output = lam154.rombif
workers = 4

[geometry]
mode = FullChannel
resolution = 155
fixed_lambda = 15.4

[axis:re]
min = 0.01
max = 90
count = 9

[fom]
stop_tolerance = 1e-8
perturbation_amplitude = 0.001
perturbation_seed = 7
perturbation_parity = Antisymmetric

[basis]
method = gram_schmidt
policy = StableOnly

[online]
constraint_mode = SplitInlet
probes = 1.0, 2.5
"""


class TestLoadConfig:
    """Test parsing and validation."""

    def test_parses_study_file(self):
        config = load_config(STUDY_INI)
        assert config.name == "lambda-15.4"
        assert config.workers == 4
        assert config.geometry.mode == GeometryMode.FULL_CHANNEL
        assert config.geometry.fixed_lambda == 15.4
        assert config.axes[0].name == "re" and config.axes[0].count == 9
        assert config.fom.perturbation.seed == 7
        assert config.fom.perturbation.parity == Parity.ANTISYMMETRIC
        assert config.basis.method == "gram_schmidt"
        assert config.basis.policy == BranchPolicy.STABLE_ONLY
        assert config.online.constraint_mode == ConstraintMode.SPLIT_INLET
        assert config.online.probes == [1.0, 2.5]

    def test_defaults(self):
        config = load_config(STUDY_INI)
        assert config.online.relaxation == 0.7
        assert config.fom.asymmetry_threshold == 1e-3
        assert config.basis.mirror_augment is True

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            load_config(STUDY_INI + "\n[extras]\nkey = 1\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            load_config(STUDY_INI.replace("workers = 4", "workers = 4\ncolour = blue"))

    def test_malformed_text(self):
        with pytest.raises(ConfigError):
            load_config("no section header here")

    def test_single_axis_without_lambda(self):
        with pytest.raises(ConfigError):
            load_config(STUDY_INI.replace("fixed_lambda = 15.4\n", ""))

    def test_missing_flow_axis(self):
        text = "[geometry]\nmode = ExpansionOnly\n\n[axis:lambda]\nmin = 2\nmax = 4\ncount = 2\n"
        with pytest.raises(ConfigError):
            load_config(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(str(tmp_path / "absent.ini"))

    def test_reads_file(self, tmp_path):
        path = tmp_path / "study.ini"
        path.write_text(STUDY_INI, encoding="utf-8")
        assert load_config_file(str(path)).name == "lambda-15.4"


class TestModels:
    """Test the pydantic models directly."""

    def test_axis_values_must_ascend(self):
        with pytest.raises(ValueError):
            AxisSpec(name="re", min=1.0, max=3.0, count=2, values=[3.0, 1.0])

    def test_axis_values_must_match_count(self):
        with pytest.raises(ValueError):
            AxisSpec(name="re", min=1.0, max=3.0, count=3, values=[1.0, 3.0])

    def test_perturbation_sign(self):
        with pytest.raises(ValueError):
            PerturbationConfig(sign=0)

    def test_blend_thresholds(self):
        with pytest.raises(ValueError):
            FomConfig(blend_start=1e-4, blend_end=1e-2)

    def test_frozen(self):
        config = load_config(STUDY_INI)
        with pytest.raises(ValueError):
            config.name = "other"


class TestDumpConfig:
    """Test the canonical INI form."""

    def test_round_trip(self):
        config = load_config(STUDY_INI)
        assert load_config(dump_config(config)) == config

    def test_canonical_text_is_stable(self):
        text = dump_config(load_config(STUDY_INI))
        assert dump_config(load_config(text)) == text

    def test_floats_use_repr(self):
        config = CampaignConfig(
            axes=[AxisSpec(name="re", min=0.1, max=2.0 / 3.0, count=2)],
            geometry={"fixed_lambda": 2.0},
        )
        text = dump_config(config)
        assert f"max = {2.0 / 3.0!r}" in text
        assert load_config(text).axes[0].max == 2.0 / 3.0
