"""Routing ``mcp`` actions to a tool transport and shaping the result."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol

import httpx

from ..actions import Action, ActionKind
from ..device.fixtures import load_yaml
from .registry import Registry

DEFAULT_CAP = 4000
MIN_CAP = 64  # room for the marker itself


class ToolStatus(str, Enum):
    OK = "ok"
    TOOL_ERROR = "tool_error"
    TRANSPORT_ERROR = "transport_error"


@dataclass(frozen=True)
class ToolResult:
    status: ToolStatus
    content: str
    truncated: bool = False
    original_length: int = 0

    def to_json(self) -> dict[str, Any]:
        return {
            "status": self.status.value,
            "content": self.content,
            "truncated": self.truncated,
            "original_length": self.original_length,
        }


class McpTransportError(RuntimeError):
    pass


class ToolTransport(Protocol):
    def send(self, request: Mapping[str, Any]) -> Mapping[str, Any]:
        """``{"tool", "arguments"}`` in, ``{"content"}`` or ``{"error"}`` out."""


def truncation_marker(omitted: int) -> str:
    return f"…[truncated, {omitted} chars omitted]"


def truncate(text: str, cap: int = DEFAULT_CAP) -> tuple[str, bool]:
    """Keep the head of ``text`` so the result, marker included, fits in ``cap``.

    Idempotent: a truncated result is already within the cap.
    """
    if cap < MIN_CAP:
        raise ValueError(f"cap must be at least {MIN_CAP} characters")
    if len(text) <= cap:
        return text, False
    head = max(cap - len(truncation_marker(len(text))), 0)
    # the marker's digit count depends on how much is dropped; settle it
    while head > 0 and head + len(truncation_marker(len(text) - head)) > cap:
        head -= 1
    return text[:head] + truncation_marker(len(text) - head), True


def params_digest(params: Mapping[str, Any]) -> str:
    canon = json.dumps(params, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _content_text(reply: Any) -> str:
    if isinstance(reply, str):
        return reply
    return json.dumps(reply, sort_keys=True, ensure_ascii=False)


def dispatch(registry: Registry, call: Action, transport: ToolTransport, *,
             allowlist: Iterable[tuple[str, str]] | None = None, cap: int = DEFAULT_CAP) -> ToolResult:
    if call.kind is not ActionKind.MCP_CALL:
        raise ValueError("dispatch expects an mcp action")
    hits = registry.by_name(call.tool_name or "", allowlist)
    if not hits:
        return ToolResult(ToolStatus.TOOL_ERROR, f"unknown tool: {call.tool_name}")
    if len(hits) > 1:
        servers = ", ".join(h.server for h in hits)
        return ToolResult(ToolStatus.TOOL_ERROR, f"ambiguous tool {call.tool_name} (servers: {servers})")
    spec = hits[0]
    params = dict(call.params or {})
    missing = [p for p in spec.required if p not in params]
    if missing:
        return ToolResult(ToolStatus.TOOL_ERROR, "missing required parameter(s): " + ", ".join(missing))

    try:
        reply = transport.send({"tool": spec.name, "arguments": params})
    except McpTransportError as e:
        return ToolResult(ToolStatus.TRANSPORT_ERROR, str(e))
    if "error" in reply:
        text = _content_text(reply["error"])
        status = ToolStatus.TOOL_ERROR
    else:
        text = _content_text(reply.get("content", ""))
        status = ToolStatus.OK
    content, cut = truncate(text, cap)
    return ToolResult(status, content, cut, len(text))


class FixtureTransport:
    """Replays recorded responses keyed by (tool, params digest)."""

    def __init__(self, records: Iterable[Mapping[str, Any]] = ()):
        self._table: dict[tuple[str, str], Mapping[str, Any]] = {}
        for rec in records:
            digest = rec.get("params_digest") or params_digest(rec.get("params", {}))
            self._table[(rec["tool"], digest)] = rec
        self.calls: list[Mapping[str, Any]] = []

    @classmethod
    def from_file(cls, path: str | Path) -> FixtureTransport:
        path = Path(path)
        data = load_yaml(path.read_text(encoding="utf-8")) or {}
        records = []
        for rec in data.get("records", []):
            rec = dict(rec)
            if "response_file" in rec:
                ref = path.parent / "mcp_responses" / rec.pop("response_file")
                rec["response"] = ref.read_text(encoding="utf-8")
            records.append(rec)
        return cls(records)

    def send(self, request: Mapping[str, Any]) -> Mapping[str, Any]:
        self.calls.append(request)
        rec = self._table.get((request["tool"], params_digest(request.get("arguments", {}))))
        if rec is None:
            return {"error": f"no recorded response for {request['tool']} with these arguments"}
        if rec.get("transport_error"):
            raise McpTransportError(str(rec["transport_error"]))
        if "error" in rec:
            return {"error": rec["error"]}
        return {"content": rec.get("response", "")}


class HttpJsonRpcTransport:
    """Calls a streamable-HTTP MCP server with JSON-RPC ``tools/call``."""

    def __init__(self, url: str, client: httpx.Client | None = None, timeout: float = 60.0,
                 headers: Mapping[str, str] | None = None):
        self.url = url
        self._client = client or httpx.Client(timeout=timeout)
        self._headers = dict(headers or {})
        self._next_id = 0

    def send(self, request: Mapping[str, Any]) -> Mapping[str, Any]:
        self._next_id += 1
        body = {
            "jsonrpc": "2.0",
            "id": self._next_id,
            "method": "tools/call",
            "params": {"name": request["tool"], "arguments": dict(request.get("arguments", {}))},
        }
        try:
            resp = self._client.post(self.url, json=body, headers=self._headers)
            resp.raise_for_status()
            msg = resp.json()
        except (httpx.TimeoutException, httpx.TransportError) as e:
            raise McpTransportError(f"{type(e).__name__}: {e}") from e
        except (httpx.HTTPStatusError, ValueError) as e:
            raise McpTransportError(str(e)) from e
        if "error" in msg:
            return {"error": msg["error"].get("message", str(msg["error"]))}
        result = msg.get("result", {})
        text = "\n".join(
            part.get("text", "") for part in result.get("content", []) if part.get("type") == "text"
        )
        if result.get("isError"):
            return {"error": text}
        return {"content": text}
