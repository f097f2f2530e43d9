"""MCP tool catalog and the prompt block listing available tools."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

from ..device.fixtures import load_yaml


class DuplicateTool(ValueError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    type: str = "string"
    required: bool = True


@dataclass(frozen=True)
class ToolSpec:
    server: str
    name: str
    description: str = ""
    param_schema: Mapping[str, ParamSpec] = field(default_factory=dict)

    @property
    def key(self) -> tuple[str, str]:
        return self.server, self.name

    @property
    def required(self) -> list[str]:
        return [p for p, spec in self.param_schema.items() if spec.required]


class Registry:
    """Immutable index of tools by (server, name)."""

    def __init__(self, specs: Iterable[ToolSpec] = ()):
        index: dict[tuple[str, str], ToolSpec] = {}
        for spec in specs:
            if spec.key in index:
                raise DuplicateTool(f"{spec.server}/{spec.name}")
            index[spec.key] = spec
        self._index = index

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, key: tuple[str, str]) -> bool:
        return key in self._index

    def __iter__(self):
        return iter(sorted(self._index.values(), key=lambda s: s.key))

    def get(self, server: str, name: str) -> ToolSpec | None:
        return self._index.get((server, name))

    def counts(self) -> dict[str, int]:
        return dict(sorted(Counter(s for s, _ in self._index).items()))

    def by_name(self, name: str, allowlist: Iterable[tuple[str, str]] | None = None) -> list[ToolSpec]:
        allowed = set(allowlist) if allowlist is not None else None
        return [
            spec for key, spec in sorted(self._index.items())
            if key[1] == name and (allowed is None or key in allowed)
        ]

    def resolve(self, ref: str) -> tuple[str, str]:
        """Accept ``server/name`` or a bare unique tool name."""
        if "/" in ref:
            server, name = ref.rsplit("/", 1)
            if (server, name) in self._index:
                return server, name
        hits = self.by_name(ref)
        if len(hits) == 1:
            return hits[0].key
        raise KeyError(ref)


def register_catalog(specs: Iterable[ToolSpec]) -> Registry:
    return Registry(specs)


def specs_from_mapping(data: Mapping[str, Any]) -> list[ToolSpec]:
    specs = []
    for server in data.get("servers", []):
        for tool in server.get("tools", []):
            params = {
                pname: ParamSpec(str(p.get("type", "string")), bool(p.get("required", True)))
                for pname, p in (tool.get("params") or {}).items()
            }
            specs.append(ToolSpec(server["name"], tool["name"], tool.get("description", ""), params))
    return specs


def load_catalog(path: str | Path | None = None) -> Registry:
    if path is None:
        text = resources.files("mobilebench").joinpath("data/mcp_catalog.yaml").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return register_catalog(specs_from_mapping(load_yaml(text)))


NO_TOOLS_LINE = "No MCP tools are available for this task."


def render_tool_block(registry: Registry, allowlist: Iterable[tuple[str, str]]) -> str:
    keys = sorted(set(allowlist))
    missing = [k for k in keys if k not in registry]
    if missing:
        raise KeyError(f"allowlist entries not in registry: {missing}")
    if not keys:
        return NO_TOOLS_LINE
    lines = []
    for server, name in keys:
        spec = registry.get(server, name)
        lines.append(f"### {name} ({server})")
        if spec.description:
            lines.append(spec.description)
        if spec.param_schema:
            lines.append("Parameters:")
            for pname, p in spec.param_schema.items():
                flag = "required" if p.required else "optional"
                lines.append(f"- {pname}: {p.type} ({flag})")
        else:
            lines.append("Parameters: none")
        lines.append("")
    return "\n".join(lines).rstrip("\n")
