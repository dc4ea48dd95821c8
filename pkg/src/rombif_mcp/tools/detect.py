# src/rombif_mcp/tools/detect.py
"""Bifurcation detection tools."""

import asyncio
from typing import Any, Dict, Optional

import mcp.types as types

from ..archive import ArchiveClient
from ..pipeline import detect
from ..stability import DetectOptions, Indicator, Variant, trace_csv


class DetectApi:
    """Tools that sweep the reduced model for symmetry breaking."""

    async def _detect(
        self,
        client: ArchiveClient,
        archive: str,
        expansion_ratio: float,
        re_min: Optional[float],
        re_max: Optional[float],
        delta_re: Optional[float],
        variant: str,
        indicator: str,
        symmetric_base: bool,
    ):
        reader = client.open(archive)
        config = reader.config()
        online = config.online if config is not None else None
        options = DetectOptions(
            indicator=Indicator(indicator),
            symmetric_base=symmetric_base,
            **({} if online is None else {
                "constraint_mode": online.constraint_mode,
                "tol": online.tol,
                "max_iter": online.max_iter,
                "relaxation": online.relaxation,
            }),
        )
        re_range = None
        if re_min is not None or re_max is not None:
            hull = reader.training_hull() or {"re": [re_min, re_max]}
            re_range = (
                re_min if re_min is not None else hull["re"][0],
                re_max if re_max is not None else hull["re"][1],
            )
        return await asyncio.to_thread(
            detect, reader, expansion_ratio, re_range, delta_re, Variant(variant), options
        )

    async def detect_bifurcation(
        self,
        client: ArchiveClient,
        archive: str,
        expansion_ratio: float,
        re_min: Optional[float] = None,
        re_max: Optional[float] = None,
        delta_re: Optional[float] = None,
        variant: str = "FullJacobian",
        indicator: str = "TrackedEigenvalue",
        symmetric_base: bool = True,
    ) -> Dict[str, Any]:
        """Locate the symmetry-breaking Reynolds number at a fixed expansion ratio."""
        result = await self._detect(
            client, archive, expansion_ratio, re_min, re_max, delta_re,
            variant, indicator, symmetric_base,
        )

        return {
            "success": True,
            **result.summary(),
        }

    async def export_eigen_trace(
        self,
        client: ArchiveClient,
        archive: str,
        expansion_ratio: float,
        re_min: Optional[float] = None,
        re_max: Optional[float] = None,
        delta_re: Optional[float] = None,
        variant: str = "FullJacobian",
        indicator: str = "TrackedEigenvalue",
        symmetric_base: bool = True,
    ) -> Dict[str, Any]:
        """Eigenvalue trace of a detection sweep as CSV (re,k,real,imag,tracked_flag)."""
        result = await self._detect(
            client, archive, expansion_ratio, re_min, re_max, delta_re,
            variant, indicator, symmetric_base,
        )

        return {
            "success": True,
            "status": result.status,
            "refined_re_sb": result.refined_re_sb,
            "csv": trace_csv(result.trace),
        }


_DETECT_PROPERTIES = {
    "archive": {
        "type": "string",
        "description": "Archive path"
    },
    "expansion_ratio": {
        "type": "number",
        "description": "Channel height over contraction width (lambda)"
    },
    "re_min": {
        "type": "number",
        "description": "Sweep start (defaults to the smallest training Re)"
    },
    "re_max": {
        "type": "number",
        "description": "Sweep end (defaults to the largest training Re)"
    },
    "delta_re": {
        "type": "number",
        "description": "Sweep step (defaults to 1/200 of the range)"
    },
    "variant": {
        "type": "string",
        "description": "Linearized operator",
        "default": "FullJacobian",
        "enum": ["ConvectionOnly", "FullJacobian"]
    },
    "indicator": {
        "type": "string",
        "description": "Eigenvalue whose sign change marks the bifurcation",
        "default": "TrackedEigenvalue",
        "enum": ["TrackedEigenvalue", "AntisymmetricEigenvalue"]
    },
    "symmetric_base": {
        "type": "boolean",
        "description": "Linearize about the mirror-symmetric reduced solution",
        "default": True
    }
}

DETECT_TOOLS = [
    types.Tool(
        name="detect_bifurcation",
        description="Sweep Re with the reduced model and bracket the symmetry-breaking bifurcation",
        inputSchema={
            "type": "object",
            "properties": _DETECT_PROPERTIES,
            "required": ["archive", "expansion_ratio"]
        }
    ),
    types.Tool(
        name="export_eigen_trace",
        description="Run a detection sweep and export every reduced spectrum as CSV",
        inputSchema={
            "type": "object",
            "properties": _DETECT_PROPERTIES,
            "required": ["archive", "expansion_ratio"]
        }
    ),
]
