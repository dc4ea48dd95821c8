# tests/test_diagram_tools.py
"""Tests for bifurcation diagram tools."""

import pytest

from conftest import asymmetric_amplitude
from rombif_mcp.errors import CampaignError
from rombif_mcp.tools.diagram import DiagramApi


class TestDiagramTools:
    """Test the diagram tool."""

    @pytest.mark.asyncio
    async def test_explicit_values(self, mock_client, pitchfork_reader):
        """Test a diagram at given Reynolds numbers."""
        mock_client.open.return_value = pitchfork_reader

        api = DiagramApi()
        result = await api.bifurcation_diagram(
            mock_client, archive="model.rombif", expansion_ratio=1.0, re_values=[80.0, 20.0]
        )

        assert result["success"] is True
        assert [r["re"] for r in result["rows"]] == [20.0, 80.0]
        assert result["rows"][1]["branch"] == "AsymmetricUpper"
        assert result["rows"][1]["u_y"] == pytest.approx(asymmetric_amplitude(80.0), rel=1e-6)
        assert result["csv"].startswith("re,u_y,branch\r\n")

    @pytest.mark.asyncio
    async def test_range_and_count(self, mock_client, pitchfork_reader):
        """Test evenly spaced values from a range."""
        mock_client.open.return_value = pitchfork_reader

        api = DiagramApi()
        result = await api.bifurcation_diagram(
            mock_client, archive="model.rombif", expansion_ratio=1.0, re_min=60.0, re_max=80.0, count=3
        )

        assert [r["re"] for r in result["rows"]] == pytest.approx([60.0, 70.0, 80.0])

    @pytest.mark.asyncio
    async def test_defaults_to_training_hull(self, mock_client, pitchfork_reader):
        """Test that the trained Re range is used without arguments."""
        mock_client.open.return_value = pitchfork_reader

        api = DiagramApi()
        result = await api.bifurcation_diagram(mock_client, archive="model.rombif", expansion_ratio=1.0, count=2)

        res = [r["re"] for r in result["rows"]]
        assert res[0] == 10.0 and res[-1] == 80.0
        assert len(res) == 2

    @pytest.mark.asyncio
    async def test_lower_branch_with_unstable(self, mock_client, pitchfork_reader):
        """Test sign and include_unstable options."""
        mock_client.open.return_value = pitchfork_reader

        api = DiagramApi()
        result = await api.bifurcation_diagram(
            mock_client, archive="model.rombif", expansion_ratio=1.0,
            re_values=[80.0], include_unstable=True, sign=-1,
        )

        branches = [r["branch"] for r in result["rows"]]
        assert branches == ["AsymmetricLower", "Unstable"]
        assert result["rows"][0]["u_y"] < 0.0
        assert result["metadata"]["sign"] == -1

    @pytest.mark.asyncio
    async def test_no_range_available(self, mock_client, pitchfork_reader):
        """Test the error when neither values nor a range can be found."""
        pitchfork_reader.training_hull.return_value = None
        mock_client.open.return_value = pitchfork_reader

        api = DiagramApi()
        with pytest.raises(CampaignError):
            await api.bifurcation_diagram(mock_client, archive="model.rombif", expansion_ratio=1.0)
