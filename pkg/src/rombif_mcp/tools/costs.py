# src/rombif_mcp/tools/costs.py
"""Cost accounting tools."""

from typing import Any, Dict, Optional

import mcp.types as types

from ..archive import ArchiveClient
from ..pipeline import costs


class CostsApi:
    """Tools for the offline/online cost comparison."""

    async def report_costs(
        self,
        client: ArchiveClient,
        archive: str,
        detections: Optional[int] = None,
        runs_per_detection: Optional[int] = None,
    ) -> Dict[str, Any]:
        """Savings fraction, per-query ratio and break-even count from the archive ledger."""
        reader = client.open(archive)

        return {
            "success": True,
            "costs": costs(reader, detections, runs_per_detection),
        }


COSTS_TOOLS = [
    types.Tool(
        name="report_costs",
        description=(
            "Report reduced-model savings and the break-even query count. Offline timings "
            "come from the archive; online timings cover queries made by this server process"
        ),
        inputSchema={
            "type": "object",
            "properties": {
                "archive": {
                    "type": "string",
                    "description": "Archive path"
                },
                "detections": {
                    "type": "integer",
                    "description": "Number of bifurcation detections to amortize over",
                    "minimum": 1
                },
                "runs_per_detection": {
                    "type": "integer",
                    "description": "Full-order runs a detection would need without the reduced model",
                    "default": 80,
                    "minimum": 1
                }
            },
            "required": ["archive"]
        }
    )
]
