# tests/test_sampling.py
"""Tests for Chebyshev sampling plans and manifests."""

import numpy as np
import pytest

from rombif_mcp.config import AxisSpec
from rombif_mcp.errors import SamplingError
from rombif_mcp.sampling import (
    STUDY_MEAN_VELOCITY,
    axis_values,
    chebyshev_points,
    manifest,
    parse_manifest,
    tensor_plan,
    viscosity_width_plan,
)

# Published training sets, as printed (four significant figures).
RE_TABLE = ["0.010", "3.435", "13.19", "27.79", "45.01", "62.22", "76.82", "86.58", "90.00"]
WIDTH_TABLE = ["0.025", "0.0733", "0.2085", "0.4040", "0.6210", "0.8165", "0.9517", "1"]


def _tolerance(printed: str) -> float:
    """Just over half a unit in the last printed digit."""
    decimals = len(printed.split(".")[1]) if "." in printed else 0
    return 0.51 * 10.0 ** (-decimals)


class TestChebyshevPoints:
    """Test Gauss-Lobatto-Chebyshev abscissae."""

    def test_reynolds_table(self):
        pts = chebyshev_points(0.01, 90.0, 9)
        for got, printed in zip(pts, RE_TABLE):
            assert abs(got - float(printed)) <= _tolerance(printed), printed

    def test_width_table(self):
        pts = chebyshev_points(0.025, 1.0, 8)
        for got, printed in zip(pts, WIDTH_TABLE):
            assert abs(got - float(printed)) <= _tolerance(printed), printed

    def test_endpoints_exact(self):
        pts = chebyshev_points(0.01, 90.0, 9)
        assert pts[0] == 0.01
        assert pts[-1] == 90.0

    def test_symmetric_about_midpoint(self):
        pts = np.array(chebyshev_points(2.0, 10.0, 7))
        assert np.allclose(pts + pts[::-1], 12.0, atol=1e-13)
        assert np.all(np.diff(pts) > 0)

    def test_two_points_are_the_endpoints(self):
        assert chebyshev_points(1.0, 4.0, 2) == [1.0, 4.0]

    def test_not_nested(self):
        """The 9-point set is not a superset of the 8-point set."""
        nine = chebyshev_points(0.0, 1.0, 9)
        eight = chebyshev_points(0.0, 1.0, 8)
        interior = eight[1:-1]
        assert not any(np.isclose(nine, x).any() for x in interior)

    def test_invalid_input(self):
        with pytest.raises(SamplingError):
            chebyshev_points(0.0, 1.0, 1)
        with pytest.raises(SamplingError):
            chebyshev_points(1.0, 1.0, 3)


class TestTensorPlan:
    """Test tensor-product plans."""

    def test_order_first_axis_outermost(self):
        axes = [
            AxisSpec(name="re", min=1.0, max=3.0, count=3, values=[1.0, 2.0, 3.0]),
            AxisSpec(name="lambda", min=2.0, max=4.0, count=2),
        ]
        plan = tensor_plan(axes)
        assert len(plan) == 6
        assert [s for s in plan.samples[:2]] == [(1.0, 2.0), (1.0, 4.0)]
        assert plan.points[-1].re == 3.0 and plan.points[-1].lam == 4.0
        assert plan.axis_names == ["re", "lambda"]

    def test_single_axis_needs_lambda(self):
        axes = [AxisSpec(name="re", min=1.0, max=3.0, count=2)]
        with pytest.raises(SamplingError):
            tensor_plan(axes)
        plan = tensor_plan(axes, fixed_lambda=15.4)
        assert {p.lam for p in plan.points} == {15.4}

    def test_width_axis_maps_to_lambda(self):
        axes = [
            AxisSpec(name="re", min=1.0, max=2.0, count=2),
            AxisSpec(name="width", min=0.25, max=0.5, count=2),
        ]
        plan = tensor_plan(axes)
        assert sorted({p.lam for p in plan.points}) == [2.0, 4.0]

    def test_viscosity_axis_converts_to_reynolds(self):
        axes = [
            AxisSpec(name="nu", min=1.5e-3, max=5e-3, count=2),
            AxisSpec(name="lambda", min=2.0, max=10.0, count=2),
        ]
        plan = tensor_plan(axes, mean_velocity=STUDY_MEAN_VELOCITY)
        assert plan.points[0].re == pytest.approx(2.0 * (2.0 / 3.0) * 0.5 / 1.5e-3, rel=1e-12)

    def test_empty_and_duplicate_axes(self):
        with pytest.raises(SamplingError):
            tensor_plan([])
        axis = AxisSpec(name="re", min=1.0, max=2.0, count=2)
        with pytest.raises(SamplingError):
            tensor_plan([axis, axis], fixed_lambda=2.0)

    def test_out_of_range_sample(self):
        """A width wider than the channel gives lambda < 1."""
        axes = [
            AxisSpec(name="re", min=1.0, max=2.0, count=2),
            AxisSpec(name="width", min=0.5, max=2.0, count=2),
        ]
        with pytest.raises(SamplingError):
            tensor_plan(axes)

    def test_explicit_values_override(self):
        axis = AxisSpec(name="re", min=1.0, max=9.0, count=3, values=[1.0, 5.0, 9.0])
        assert axis_values(axis) == [1.0, 5.0, 9.0]


class TestStudyPlan:
    """Test the two-parameter width study."""

    def test_size_and_axes(self):
        plan = viscosity_width_plan()
        assert len(plan) == 42
        assert plan.axis_names == ["nu", "lambda"]

    def test_reynolds_range(self):
        plan = viscosity_width_plan()
        res = [p.re for p in plan.points]
        assert max(res) == pytest.approx(2.0 * (2.0 / 3.0) * 0.5 / 1.5e-3, rel=1e-12)
        assert min(res) == pytest.approx(2.0 * (2.0 / 3.0) * 0.1 / 5e-3, rel=1e-12)


class TestManifest:
    """Test the CSV manifest."""

    def test_header_and_line_endings(self):
        plan = tensor_plan([AxisSpec(name="re", min=1.0, max=4.0, count=2)], fixed_lambda=2.0)
        text = manifest(plan)
        assert text.startswith("index,axis:re,re,lambda\r\n")
        assert text.count("\r\n") == 3

    def test_round_trip(self):
        plan = viscosity_width_plan()
        rows = parse_manifest(manifest(plan))
        assert len(rows) == 42
        for (axes, point), sample, expected in zip(rows, plan.samples, plan.points):
            assert point == expected
            assert axes == {"nu": sample[0], "lambda": sample[1]}
