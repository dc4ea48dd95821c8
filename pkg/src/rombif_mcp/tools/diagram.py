# src/rombif_mcp/tools/diagram.py
"""Bifurcation diagram tools."""

import asyncio
from typing import Any, Dict, List, Optional

import mcp.types as types
import numpy as np

from ..archive import ArchiveClient
from ..errors import CampaignError
from ..pipeline import bifurcation_diagram


class DiagramApi:
    """Tools that trace the pitchfork with the reduced model."""

    async def bifurcation_diagram(
        self,
        client: ArchiveClient,
        archive: str,
        expansion_ratio: float,
        re_values: Optional[List[float]] = None,
        re_min: Optional[float] = None,
        re_max: Optional[float] = None,
        count: int = 50,
        probe_x: float = 1.0,
        include_unstable: bool = False,
        sign: int = 1,
    ) -> Dict[str, Any]:
        """Transverse velocity at an axis probe versus Re, as rows and CSV."""
        reader = client.open(archive)
        if re_values is None:
            hull = reader.training_hull()
            lo = re_min if re_min is not None else (hull["re"][0] if hull else None)
            hi = re_max if re_max is not None else (hull["re"][1] if hull else None)
            if lo is None or hi is None:
                raise CampaignError("Give re_values or an Re range")
            re_values = np.linspace(lo, hi, count).tolist()

        diagram = await asyncio.to_thread(
            bifurcation_diagram, reader, expansion_ratio, re_values, probe_x, include_unstable, sign
        )

        return {
            "success": True,
            **diagram,
        }


DIAGRAM_TOOLS = [
    types.Tool(
        name="bifurcation_diagram",
        description="Bifurcation diagram: transverse velocity on the channel axis at a probe downstream of the expansion",
        inputSchema={
            "type": "object",
            "properties": {
                "archive": {
                    "type": "string",
                    "description": "Archive path"
                },
                "expansion_ratio": {
                    "type": "number",
                    "description": "Channel height over contraction width (lambda)"
                },
                "re_values": {
                    "type": "array",
                    "items": {"type": "number"},
                    "description": "Reynolds numbers to evaluate"
                },
                "re_min": {
                    "type": "number",
                    "description": "Range start when re_values is omitted"
                },
                "re_max": {
                    "type": "number",
                    "description": "Range end when re_values is omitted"
                },
                "count": {
                    "type": "integer",
                    "description": "Number of evenly spaced Re values",
                    "default": 50,
                    "minimum": 2
                },
                "probe_x": {
                    "type": "number",
                    "description": "Probe distance past the expansion, in channel heights",
                    "default": 1.0
                },
                "include_unstable": {
                    "type": "boolean",
                    "description": "Also emit the unstable symmetric branch",
                    "default": False
                },
                "sign": {
                    "type": "integer",
                    "description": "Branch side: +1 upper, -1 lower",
                    "default": 1,
                    "enum": [1, -1]
                }
            },
            "required": ["archive", "expansion_ratio"]
        }
    )
]
