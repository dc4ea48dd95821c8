# tests/test_reproduction.py
"""Full-scale detection runs. Deselected by default; run with ``-m slow``."""

import numpy as np
import pytest

from rombif_mcp.archive import ArchiveClient, ArchiveReader
from rombif_mcp.config import load_config
from rombif_mcp.fom import asymmetry_indicator, find_both_branches
from rombif_mcp.geometry import ParameterPoint, build_geometry, build_grid
from rombif_mcp.pipeline import bifurcation_diagram, detect, detect_many, run_offline
from rombif_mcp.stability import DetectOptions, Indicator

pytestmark = pytest.mark.slow

SINGLE_RATIO_INI = """
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
"""

FLIPPED_SIGN_INI = SINGLE_RATIO_INI + """
[fom]
perturbation_sign = -1
"""

RATIO_SWEEP_INI = """
[campaign]
name = ratio-sweep
output = ratios.rombif
workers = 4

[geometry]
mode = ExpansionOnly
resolution = 101

[axis:re]
min = 1
max = 300
count = 9

[axis:lambda]
min = 2
max = 10
count = 7
values = 2, 3, 4, 5, 6, 8, 10
"""


@pytest.fixture(scope="module")
def single_ratio(tmp_path_factory):
    config = load_config(SINGLE_RATIO_INI)
    return run_offline(config, ArchiveClient(base_dir=tmp_path_factory.mktemp("lam154")))


@pytest.fixture(scope="module")
def flipped_sign(tmp_path_factory):
    """The lambda = 15.4 campaign with the perturbation pushed to the other side."""
    config = load_config(FLIPPED_SIGN_INI)
    return run_offline(config, ArchiveClient(base_dir=tmp_path_factory.mktemp("lam154-flipped")))


@pytest.fixture(scope="module")
def ratio_sweep(tmp_path_factory):
    config = load_config(RATIO_SWEEP_INI)
    return run_offline(config, ArchiveClient(base_dir=tmp_path_factory.mktemp("ratios")))


class TestSingleRatio:
    """Expansion ratio 15.4 with nine training Reynolds numbers."""

    def test_snapshot_census(self, single_ratio):
        """Four symmetric-only samples and five with both branches."""
        branches = single_ratio.summary()["branches"]
        assert branches == {"AsymmetricLower": 5, "Symmetric": 4, "Unstable": 5} or branches == {
            "AsymmetricUpper": 5, "Symmetric": 4, "Unstable": 5,
        }

    def test_detected_reynolds(self, single_ratio):
        reader = ArchiveReader(single_ratio.path)
        result = detect(reader, 15.4, (0.01, 90.0))
        assert result.found
        assert 19.5 <= result.refined_re_sb <= 32.5

        geom = build_geometry(15.4)
        grid = build_grid(geom, 155)
        below = find_both_branches(geom, grid, ParameterPoint(re=0.8 * result.refined_re_sb, lam=15.4))
        above = find_both_branches(geom, grid, ParameterPoint(re=1.2 * result.refined_re_sb, lam=15.4))
        assert len(below) == 1
        assert asymmetry_indicator(above[-1].field) >= 1e-3

    def test_indicators_agree(self, single_ratio):
        reader = ArchiveReader(single_ratio.path)
        tracked = detect(reader, 15.4, (0.01, 90.0))
        restricted = detect(
            reader, 15.4, (0.01, 90.0),
            options=DetectOptions(indicator=Indicator.ANTISYMMETRIC_EIGENVALUE),
        )
        assert restricted.found
        lo, hi = tracked.bracket
        assert lo - tracked.delta_re <= restricted.refined_re_sb <= hi + tracked.delta_re

    def test_below_critical(self, single_ratio):
        assert detect(ArchiveReader(single_ratio.path), 15.4, (0.01, 20.0)).status == "not_found"


class TestMirrorInvariance:
    """Flipping the perturbation sign mirrors the branches but not the threshold."""

    def test_same_critical_reynolds(self, single_ratio, flipped_sign):
        original = detect(ArchiveReader(single_ratio.path), 15.4, (0.01, 90.0))
        flipped = detect(ArchiveReader(flipped_sign.path), 15.4, (0.01, 90.0))
        assert original.found and flipped.found
        lo, hi = original.bracket
        assert abs(flipped.refined_re_sb - original.refined_re_sb) <= hi - lo

    def test_snapshots_land_on_the_other_side(self, single_ratio, flipped_sign):
        first = set(single_ratio.summary()["branches"])
        second = set(flipped_sign.summary()["branches"])
        assert first - {"Symmetric", "Unstable"} != second - {"Symmetric", "Unstable"}

    def test_negated_diagram(self, single_ratio, flipped_sign):
        re_values = [10.0, 20.0, 40.0, 60.0, 80.0]
        up = bifurcation_diagram(ArchiveReader(single_ratio.path), 15.4, re_values, sign=1)["rows"]
        down = bifurcation_diagram(ArchiveReader(flipped_sign.path), 15.4, re_values, sign=-1)["rows"]
        scale = max(abs(r["u_y"]) for r in up)
        assert scale > 1e-3
        for a, b in zip(up, down):
            assert b["u_y"] == pytest.approx(-a["u_y"], abs=1e-3 * scale)


class TestRatioSweep:
    """Seven expansion ratios on one ExpansionOnly grid."""

    def test_critical_reynolds_falls_with_expansion_ratio(self, ratio_sweep):
        reader = ArchiveReader(ratio_sweep.path)
        ratios = [2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0]
        found = detect_many(reader, ratios, (1.0, 300.0), workers=4)
        values = [r.refined_re_sb for r in found]
        assert all(v is not None for v in values)
        assert all(a > b for a, b in zip(values, values[1:]))
        assert 0.75 * 34.5 <= values[ratios.index(6.0)] <= 1.25 * 34.5

    def test_pitchfork_diagram_at_lambda_6(self, ratio_sweep):
        """Flat below 0.9 Re_sb, growing transverse velocity over [1.05, 1.5] Re_sb."""
        reader = ArchiveReader(ratio_sweep.path)
        re_sb = detect(reader, 6.0, (1.0, 300.0)).refined_re_sb
        below = list(np.linspace(0.3, 0.85, 6) * re_sb)
        above = list(np.linspace(1.05, 1.5, 6) * re_sb)
        rows = bifurcation_diagram(reader, 6.0, below + above)["rows"]

        mean_velocity = reader.operators().mean_velocity
        for row in rows[:6]:
            assert abs(row["u_y"]) <= 1e-3 * mean_velocity
            assert row["branch"] == "Symmetric"
        magnitudes = [abs(row["u_y"]) for row in rows[6:]]
        assert all(b > a for a, b in zip(magnitudes, magnitudes[1:]))
        assert all(row["branch"].startswith("Asymmetric") for row in rows[6:])
