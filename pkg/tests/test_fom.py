# tests/test_fom.py
"""Tests for the full-order steady solver."""

import logging

import numpy as np
import pytest

from rombif_mcp import fom
from rombif_mcp.config import FomConfig
from rombif_mcp.errors import FomConvergenceError, GeometryError
from rombif_mcp.fom import (
    Branch,
    VelocityField,
    antisymmetric_perturbation,
    asymmetry_indicator,
    classify_branch,
    find_both_branches,
    flow_rate,
    jet_side,
    probe_velocity,
    section_fluxes,
    solve_steady,
)
from rombif_mcp.geometry import GeometryMode, ParameterPoint, build_geometry, build_grid


@pytest.fixture(scope="module")
def low_re_snapshot(small_geometry, small_grid):
    """Converged symmetric flow at Re = 1, lambda = 2."""
    return solve_steady(small_geometry, small_grid, ParameterPoint(re=1.0, lam=2.0))


class TestPerturbation:
    """Test the antisymmetric perturbation field."""

    def test_antisymmetric_and_scaled(self, small_grid):
        f = antisymmetric_perturbation(small_grid, 1e-3, seed=0)
        assert np.allclose(small_grid.mirror_vector(f), -f, atol=1e-18)
        assert np.max(np.abs(f)) == pytest.approx(1e-3)

    def test_seeded(self, small_grid):
        a = antisymmetric_perturbation(small_grid, 1e-3, seed=4)
        b = antisymmetric_perturbation(small_grid, 1e-3, seed=4)
        c = antisymmetric_perturbation(small_grid, 1e-3, seed=5)
        assert np.array_equal(a, b)
        assert not np.allclose(a, c)

    def test_sign_flips_field(self, small_grid):
        a = antisymmetric_perturbation(small_grid, 1e-3, seed=2, sign=1)
        b = antisymmetric_perturbation(small_grid, 1e-3, seed=2, sign=-1)
        assert np.array_equal(a, -b)

    def test_vanishes_on_fixed_faces(self, small_grid):
        """No flow through walls, inlet or outlet corners."""
        f = antisymmetric_perturbation(small_grid, 1.0, seed=1)
        field = VelocityField(small_grid, f)
        assert np.all(field.u[0, :] == 0.0)
        assert np.all(field.v[:, 0] == 0.0)
        assert np.all(field.v[:, -1] == 0.0)


class TestSolveSteady:
    """Test the steady solve at low Reynolds number."""

    def test_symmetric_branch(self, low_re_snapshot):
        assert low_re_snapshot.branch == Branch.SYMMETRIC
        assert asymmetry_indicator(low_re_snapshot.field) < 1e-8
        assert low_re_snapshot.convergence_residual < 1e-8

    def test_divergence_free(self, low_re_snapshot):
        assert np.max(np.abs(low_re_snapshot.field.divergence())) < 1e-9

    def test_flux_through_every_section(self, low_re_snapshot):
        """The inlet flux mean * w_c passes every vertical grid line."""
        fluxes = section_fluxes(low_re_snapshot.field)
        assert np.allclose(fluxes, 0.5, rtol=1e-9)

    def test_flow_rate(self, low_re_snapshot):
        """Integrated u equals w_c times the domain length."""
        assert flow_rate(low_re_snapshot.field) == pytest.approx(0.5 * 6.0, rel=1e-9)

    def test_metadata(self, low_re_snapshot):
        meta = low_re_snapshot.metadata
        assert meta["nu"] == pytest.approx(1.0)
        assert meta["warm_start"] is False
        assert meta["wall_time"] >= 0.0
        assert meta["perturbation"] is None
        assert low_re_snapshot.iterations >= 1

    def test_axis_has_no_transverse_velocity(self, low_re_snapshot):
        _, v = probe_velocity(low_re_snapshot.field, 1.0, 0.0)
        assert abs(v) < 1e-10

    def test_warm_start(self, small_geometry, small_grid, low_re_snapshot):
        """Starting from the converged field returns the same steady state."""
        snap = solve_steady(
            small_geometry, small_grid, ParameterPoint(re=1.0, lam=2.0),
            initial=low_re_snapshot.field,
        )
        assert snap.metadata["warm_start"] is True
        assert np.allclose(snap.field.data, low_re_snapshot.field.data, atol=1e-6)

    def test_lambda_mismatch(self, small_geometry, small_grid):
        with pytest.raises(GeometryError):
            solve_steady(small_geometry, small_grid, ParameterPoint(re=1.0, lam=3.0))

    def test_step_limit(self, small_geometry, small_grid):
        """Hitting max_steps raises with the residual history attached."""
        config = FomConfig(max_steps=1)
        with pytest.raises(FomConvergenceError) as exc_info:
            solve_steady(small_geometry, small_grid, ParameterPoint(re=1.0, lam=2.0), config)
        assert len(exc_info.value.residual_history) == 1

    @pytest.mark.parametrize("mode", [GeometryMode.FULL_CHANNEL, GeometryMode.EXPANSION_ONLY])
    @pytest.mark.parametrize("re", [1.0, 50.0])
    def test_poiseuille_when_no_expansion(self, mode, re):
        """lambda = 1 reproduces u = 1.5 (1 - 4 y^2) along the whole channel."""
        geom = build_geometry(1.0, mode=mode)
        grid = build_grid(geom, 33, 8)
        snap = solve_steady(geom, grid, ParameterPoint(re=re, lam=1.0))
        exact = 1.5 * (1.0 - 4.0 * grid.yc**2)
        assert np.max(np.abs(snap.field.u - exact[None, :])) <= 2e-3 * 1.5


class TestBranches:
    """Test branch classification."""

    def test_classify_mirror_pair(self, small_grid, low_re_snapshot):
        """A field and its mirror land on opposite asymmetric branches."""
        f = VelocityField(
            small_grid,
            low_re_snapshot.field.data + antisymmetric_perturbation(small_grid, 0.2, seed=0),
        )
        first = classify_branch(f, 1e-3)
        second = classify_branch(f.mirror(), 1e-3)
        assert first.is_asymmetric and second.is_asymmetric
        assert first != second
        assert jet_side(f) == pytest.approx(-jet_side(f.mirror()), rel=1e-12)

    def test_symmetric_field(self, low_re_snapshot):
        assert classify_branch(low_re_snapshot.field, 1e-3) == Branch.SYMMETRIC

    def test_low_re_has_one_branch(self, small_geometry, small_grid):
        """Below the critical Re the perturbed solve decays back to symmetric."""
        snaps = find_both_branches(small_geometry, small_grid, ParameterPoint(re=2.0, lam=2.0))
        assert len(snaps) == 1
        assert snaps[0].branch == Branch.SYMMETRIC
        assert snaps[0].metadata["symmetry_projection"] is True

    @pytest.mark.parametrize("error", [RuntimeError("diverged"), FomConvergenceError("diverged")])
    def test_asymmetric_failure_keeps_symmetric(self, small_geometry, small_grid, monkeypatch, caplog, error):
        """A failed perturbed solve still returns the converged symmetric snapshot."""
        original = fom.solve_steady
        calls = []

        def failing_asymmetric(*args, symmetric=False, **kwargs):
            calls.append(symmetric)
            if not symmetric:
                raise error
            return original(*args, symmetric=symmetric, **kwargs)

        monkeypatch.setattr(fom, "solve_steady", failing_asymmetric)
        with caplog.at_level(logging.WARNING):
            snaps = find_both_branches(small_geometry, small_grid, ParameterPoint(re=5.0, lam=2.0))
        assert calls == [True, False]
        assert len(snaps) == 1
        assert snaps[0].branch == Branch.SYMMETRIC
        assert snaps[0].metadata["asymmetric_failure"] == "diverged"
        assert "Asymmetric solve failed" in caplog.text

    def test_branch_flags(self):
        assert Branch.UNSTABLE.is_stable is False
        assert Branch.ASYMMETRIC_LOWER.is_asymmetric
        assert not Branch.SYMMETRIC.is_asymmetric
