# tests/conftest.py
"""Shared test fixtures and configuration."""

from pathlib import Path
from unittest.mock import MagicMock

import numpy as np
import pytest

from rombif_mcp.archive import ArchiveClient, ArchiveReader
from rombif_mcp.config import AxisSpec, CampaignConfig, GeometrySpec, OnlineSpec
from rombif_mcp.costs import CostLedger
from rombif_mcp.geometry import GeometryMode, build_geometry, build_grid
from rombif_mcp.pipeline import run_offline
from rombif_mcp.rom import ReducedOperators

# The three-mode model below has a supercritical pitchfork at Re = 40:
# the antisymmetric mode 2 has Jacobian eigenvalue nu - 0.05 about the
# symmetric state a = (1, 0, 0), with nu = 2 / Re.
PITCHFORK_RE = 40.0


def make_pitchfork_ops() -> ReducedOperators:
    n = 3
    t = np.zeros((n, n, n))
    t[2, 0, 2] = 0.05
    t[2, 2, 0] = -0.1
    t[1, 2, 2] = 1.0
    t[2, 1, 2] = -1.0
    return ReducedOperators(
        diffusion=np.diag([1.0, 2.0, 1.0]),
        convection=t,
        flowrate=np.array([1.0, 0.0, 0.0]),
        inlet_traces=np.vstack([np.ones(5), np.zeros(5), np.linspace(-1.0, 1.0, 5)]),
        inlet_y=np.linspace(-0.4, 0.4, 5),
        inlet_dy=0.2,
        mirror_gram=np.diag([1.0, 1.0, -1.0]),
        domain_length=1.0,
        channel_height=1.0,
        mean_velocity=1.0,
        mode=GeometryMode.EXPANSION_ONLY,
        probes={"x=1": np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])},
        jet_moments=np.array([0.0, 0.0, 1.0]),
    )


def asymmetric_amplitude(re: float) -> float:
    """Antisymmetric coefficient of the asymmetric branch of the model."""
    nu = 2.0 / re
    return float(np.sqrt(2.0 * nu * (0.05 - nu)))


@pytest.fixture
def pitchfork_ops():
    """Synthetic reduced operators with a known pitchfork."""
    return make_pitchfork_ops()


@pytest.fixture
def pitchfork_reader(pitchfork_ops):
    """Mock archive reader serving the synthetic operators."""
    reader = MagicMock(spec=ArchiveReader)
    reader.operators.return_value = pitchfork_ops
    reader.config.return_value = None
    reader.training_hull.return_value = {"re": [10.0, 80.0], "lambda": [1.0, 1.0]}
    reader.ledger = CostLedger()
    return reader


@pytest.fixture
def mock_client():
    """Create a mock archive client."""
    client = MagicMock(spec=ArchiveClient)
    client.base_dir = Path("archives")
    return client


@pytest.fixture(scope="session")
def small_geometry():
    return build_geometry(2.0, mode=GeometryMode.EXPANSION_ONLY)


@pytest.fixture(scope="session")
def small_grid(small_geometry):
    """ExpansionOnly grid, lambda = 2, 24 x 17 cells."""
    return build_grid(small_geometry, 17, 4)


@pytest.fixture(scope="session")
def full_grid():
    """FullChannel grid, lambda = 2, with one blocked contraction column."""
    return build_grid(build_geometry(2.0), 17, 4)


def tiny_config(**updates) -> CampaignConfig:
    config = CampaignConfig(
        name="tiny",
        output="tiny.rombif",
        geometry=GeometrySpec(
            mode=GeometryMode.EXPANSION_ONLY,
            resolution=17,
            streamwise_resolution=4,
            fixed_lambda=2.0,
        ),
        axes=[AxisSpec(name="re", min=1.0, max=4.0, count=2)],
        online=OnlineSpec(probes=[1.0]),
    )
    return config.model_copy(update=updates) if updates else config


@pytest.fixture(scope="session")
def tiny_campaign(tmp_path_factory):
    """Offline result of a two-sample campaign at lambda = 2."""
    base = tmp_path_factory.mktemp("archives")
    return run_offline(tiny_config(), ArchiveClient(base_dir=base))


@pytest.fixture
def tiny_reader(tiny_campaign):
    """Fresh reader (zeroed read counters) on the tiny archive."""
    return ArchiveReader(tiny_campaign.path)
