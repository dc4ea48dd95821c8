# src/rombif_mcp/tools/query.py
"""Online query and archive inspection tools."""

import asyncio
from typing import Any, Dict

import mcp.types as types

from ..archive import ArchiveClient
from ..geometry import ParameterPoint
from ..pipeline import query_online


class QueryApi:
    """Tools for reduced-model queries against an archive."""

    async def query_online(
        self,
        client: ArchiveClient,
        archive: str,
        reynolds: float,
        expansion_ratio: float,
        reconstruct: bool = False,
        symmetric: bool = False,
    ) -> Dict[str, Any]:
        """Solve the reduced model at one (Re, lambda) point."""
        reader = client.open(archive)
        p = ParameterPoint(re=reynolds, lam=expansion_ratio)
        result = await asyncio.to_thread(
            query_online, reader, p, None, reconstruct, symmetric
        )

        return {
            "success": True,
            **result.summary(),
        }

    async def describe_archive(self, client: ArchiveClient, archive: str) -> Dict[str, Any]:
        """Summarize an archive header without reading any payload."""
        reader = client.open(archive)

        return {
            "success": True,
            "archive": reader.describe(),
        }


QUERY_TOOLS = [
    types.Tool(
        name="query_online",
        description="Solve the reduced Galerkin model at a Reynolds number and expansion ratio",
        inputSchema={
            "type": "object",
            "properties": {
                "archive": {
                    "type": "string",
                    "description": "Archive path"
                },
                "reynolds": {
                    "type": "number",
                    "description": "Reynolds number based on the contraction width"
                },
                "expansion_ratio": {
                    "type": "number",
                    "description": "Channel height over contraction width (lambda)"
                },
                "reconstruct": {
                    "type": "boolean",
                    "description": "Also reconstruct the velocity field and report its norm and divergence",
                    "default": False
                },
                "symmetric": {
                    "type": "boolean",
                    "description": "Restrict the solve to the mirror-symmetric branch",
                    "default": False
                }
            },
            "required": ["archive", "reynolds", "expansion_ratio"]
        }
    ),
    types.Tool(
        name="describe_archive",
        description="Header summary of an archive: grid, snapshots, basis, operators, run info",
        inputSchema={
            "type": "object",
            "properties": {
                "archive": {
                    "type": "string",
                    "description": "Archive path"
                }
            },
            "required": ["archive"]
        }
    ),
]
