from .episode import (
    DEFAULT_BUDGET,
    MAX_CONSECUTIVE_FAILURES,
    EpisodeTrace,
    McpContext,
    Termination,
    canonical_line,
    iter_trace,
    run_episode,
)
from .policy import (
    MAX_SCREENSHOTS,
    AgentPolicy,
    ChatPolicy,
    Endpoint,
    GroundingFailure,
    HistoryEntry,
    Observation,
    PolicyError,
    ScriptedPolicy,
    ScriptExhausted,
    build_grounder_prompt,
    build_planner_prompt,
    resolve_target,
    script_line,
)
from .prompts import GROUNDER_TEMPLATE, PLANNER_TEMPLATE

__all__ = [
    "DEFAULT_BUDGET",
    "GROUNDER_TEMPLATE",
    "MAX_CONSECUTIVE_FAILURES",
    "MAX_SCREENSHOTS",
    "PLANNER_TEMPLATE",
    "AgentPolicy",
    "ChatPolicy",
    "Endpoint",
    "EpisodeTrace",
    "GroundingFailure",
    "HistoryEntry",
    "McpContext",
    "Observation",
    "PolicyError",
    "ScriptExhausted",
    "ScriptedPolicy",
    "Termination",
    "build_grounder_prompt",
    "build_planner_prompt",
    "canonical_line",
    "iter_trace",
    "resolve_target",
    "run_episode",
    "script_line",
]
