# src/rombif_mcp/tools/offline.py
"""Offline campaign tools."""

import asyncio
from typing import Any, Dict, Optional

import mcp.types as types

from ..archive import ArchiveClient
from ..config import load_config, load_config_file
from ..errors import ConfigError
from ..pipeline import run_offline


class OfflineApi:
    """Tools that run full-order campaigns and write archives."""

    async def run_offline_campaign(
        self,
        client: ArchiveClient,
        config_path: Optional[str] = None,
        config_text: Optional[str] = None,
        output: Optional[str] = None,
        workers: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> Dict[str, Any]:
        """Run sampling, full-order solves, basis construction and operator assembly."""
        if (config_path is None) == (config_text is None):
            raise ConfigError("Give exactly one of config_path or config_text")
        if config_path is not None:
            config = load_config_file(str(client.resolve(config_path)))
        else:
            config = load_config(config_text)

        result = await asyncio.to_thread(
            run_offline, config, client, output, workers, seed
        )

        return {
            "success": True,
            "campaign": config.name,
            **result.summary(),
        }


OFFLINE_TOOLS = [
    types.Tool(
        name="run_offline_campaign",
        description="Run an offline campaign (full-order snapshots, reduced basis, reduced operators) and write the archive",
        inputSchema={
            "type": "object",
            "properties": {
                "config_path": {
                    "type": "string",
                    "description": "Campaign INI file, relative to the archive directory"
                },
                "config_text": {
                    "type": "string",
                    "description": "Campaign INI text (alternative to config_path)"
                },
                "output": {
                    "type": "string",
                    "description": "Archive path (defaults to the campaign's output key)"
                },
                "workers": {
                    "type": "integer",
                    "description": "Parallel full-order solves",
                    "minimum": 1
                },
                "seed": {
                    "type": "integer",
                    "description": "Override the perturbation seed"
                }
            }
        }
    )
]
