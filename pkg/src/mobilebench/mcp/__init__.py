from .dispatch import (
    DEFAULT_CAP,
    FixtureTransport,
    HttpJsonRpcTransport,
    McpTransportError,
    ToolResult,
    ToolStatus,
    ToolTransport,
    dispatch,
    params_digest,
    truncate,
    truncation_marker,
)
from .registry import (
    NO_TOOLS_LINE,
    DuplicateTool,
    ParamSpec,
    Registry,
    ToolSpec,
    load_catalog,
    register_catalog,
    render_tool_block,
)

__all__ = [
    "DEFAULT_CAP",
    "NO_TOOLS_LINE",
    "DuplicateTool",
    "FixtureTransport",
    "HttpJsonRpcTransport",
    "McpTransportError",
    "ParamSpec",
    "Registry",
    "ToolResult",
    "ToolSpec",
    "ToolStatus",
    "ToolTransport",
    "dispatch",
    "load_catalog",
    "params_digest",
    "register_catalog",
    "render_tool_block",
    "truncate",
    "truncation_marker",
]
