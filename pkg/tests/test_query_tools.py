# tests/test_query_tools.py
"""Tests for query tools."""

import pytest

from rombif_mcp.errors import ArchiveError
from rombif_mcp.tools.query import QueryApi


class TestQueryTools:
    """Test query-related tools."""

    @pytest.mark.asyncio
    async def test_query_symmetric_state(self, mock_client, pitchfork_reader):
        """Test a query below the pitchfork."""
        mock_client.open.return_value = pitchfork_reader

        api = QueryApi()
        result = await api.query_online(mock_client, archive="model.rombif", reynolds=20.0, expansion_ratio=1.0)

        assert result["success"] is True
        assert result["parameter"] == {"re": 20.0, "lambda": 1.0}
        assert result["coefficients"] == pytest.approx([1.0, 0.0, 0.0], abs=1e-12)
        assert result["probes"]["x=1"]["u"] == pytest.approx(1.0)
        assert result["branch"] == "Symmetric"
        assert result["extrapolated"] is False
        assert "field" not in result
        mock_client.open.assert_called_once_with("model.rombif")

    @pytest.mark.asyncio
    async def test_query_symmetric_flag(self, mock_client, pitchfork_reader):
        """Test that symmetric=True suppresses the asymmetric branch."""
        mock_client.open.return_value = pitchfork_reader

        api = QueryApi()
        result = await api.query_online(
            mock_client, archive="model.rombif", reynolds=80.0, expansion_ratio=1.0, symmetric=True
        )

        assert result["branch"] == "Symmetric"
        assert result["reduced_asymmetry"] < 1e-12

    @pytest.mark.asyncio
    async def test_query_extrapolated(self, mock_client, pitchfork_reader):
        """Test that queries outside the trained range are flagged."""
        mock_client.open.return_value = pitchfork_reader

        api = QueryApi()
        result = await api.query_online(mock_client, archive="model.rombif", reynolds=5.0, expansion_ratio=1.0)

        assert result["extrapolated"] is True

    @pytest.mark.asyncio
    async def test_query_with_reconstruction(self, mock_client, tiny_reader):
        """Test field reconstruction on a real archive."""
        mock_client.open.return_value = tiny_reader

        api = QueryApi()
        result = await api.query_online(
            mock_client, archive="tiny.rombif", reynolds=2.0, expansion_ratio=2.0, reconstruct=True
        )

        assert result["success"] is True
        assert result["field"]["norm"] > 0.0
        assert tiny_reader.snapshot_reads() == 0

    @pytest.mark.asyncio
    async def test_describe_archive(self, mock_client, tiny_reader):
        """Test the header summary."""
        mock_client.open.return_value = tiny_reader

        api = QueryApi()
        result = await api.describe_archive(mock_client, archive="tiny.rombif")

        assert result["success"] is True
        assert result["archive"]["snapshot_count"] == 2
        assert result["archive"]["probes"] == ["x=1"]
        assert sum(tiny_reader.reads.values()) == 0

    @pytest.mark.asyncio
    async def test_missing_archive(self, mock_client):
        """Test that open errors propagate."""
        mock_client.open.side_effect = ArchiveError("Archive not found: nowhere.rombif")

        api = QueryApi()
        with pytest.raises(ArchiveError):
            await api.describe_archive(mock_client, archive="nowhere.rombif")
