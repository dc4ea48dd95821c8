# tests/test_server.py
"""Tests for tool routing and the error envelope."""

import json

import pytest

from rombif_mcp.server import ALL_TOOLS, API_CLASS_MAP, RombifMcpServer


@pytest.fixture
def server(mock_client):
    return RombifMcpServer(mock_client)


class TestToolRegistry:
    """Test that every listed tool is routed."""

    def test_names_match(self):
        names = [t.name for t in ALL_TOOLS]
        assert len(names) == len(set(names)) == 7
        assert set(names) == set(API_CLASS_MAP)

    def test_methods_exist(self):
        for name, api_class in API_CLASS_MAP.items():
            assert callable(getattr(api_class, name))


class TestDispatch:
    """Test calls through the server."""

    @pytest.mark.asyncio
    async def test_describe_archive(self, server, mock_client, tiny_reader):
        """Test a successful call as JSON text."""
        mock_client.open.return_value = tiny_reader

        text = await server.call_tool_text("describe_archive", {"archive": "tiny.rombif"})

        data = json.loads(text)
        assert data["success"] is True
        assert data["archive"]["snapshot_count"] == 2

    @pytest.mark.asyncio
    async def test_api_instances_are_reused(self, server, mock_client, pitchfork_reader):
        mock_client.open.return_value = pitchfork_reader
        await server.dispatch("query_online", {"archive": "m", "reynolds": 20.0, "expansion_ratio": 1.0})
        await server.dispatch("describe_archive", {"archive": "m"})
        assert len(server._api_instances) == 1

    @pytest.mark.asyncio
    async def test_unknown_tool(self, server):
        """Test the error envelope for an unknown tool."""
        data = json.loads(await server.call_tool_text("no_such_tool", {}))
        assert data == {"error": "ValueError", "message": "Unknown tool: no_such_tool", "tool_name": "no_such_tool"}

    @pytest.mark.asyncio
    async def test_domain_error(self, server, mock_client, pitchfork_reader):
        """Test that domain errors keep their class name."""
        mock_client.open.return_value = pitchfork_reader

        text = await server.call_tool_text(
            "bifurcation_diagram",
            {"archive": "m", "expansion_ratio": 1.0, "re_values": [20.0], "sign": 0},
        )

        data = json.loads(text)
        assert data["error"] == "CampaignError"
        assert data["tool_name"] == "bifurcation_diagram"

    @pytest.mark.asyncio
    async def test_bad_arguments(self, server):
        """Test that unexpected arguments are reported, not raised."""
        data = json.loads(await server.call_tool_text("report_costs", {"archive": "m", "bogus": 1}))
        assert data["error"] == "TypeError"
