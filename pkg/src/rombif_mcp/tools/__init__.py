# src/rombif_mcp/tools/__init__.py
"""Rombif MCP tools."""

from .offline import OFFLINE_TOOLS, OfflineApi
from .query import QUERY_TOOLS, QueryApi
from .detect import DETECT_TOOLS, DetectApi
from .diagram import DIAGRAM_TOOLS, DiagramApi
from .costs import COSTS_TOOLS, CostsApi

__all__ = [
    "OFFLINE_TOOLS",
    "OfflineApi",
    "QUERY_TOOLS",
    "QueryApi",
    "DETECT_TOOLS",
    "DetectApi",
    "DIAGRAM_TOOLS",
    "DiagramApi",
    "COSTS_TOOLS",
    "CostsApi",
]
