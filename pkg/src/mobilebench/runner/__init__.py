from .orchestrate import (
    MAX_VALIDATION_ATTEMPTS,
    EpisodeResult,
    IsolationError,
    RunConfig,
    RunResult,
    SnapshotCache,
    ValidationResult,
    report,
    run,
    run_task,
    validate_task,
)
from .tasks import SchemaError, TaskSpec, default_fixtures_path, default_tasks_path, load_tasks, select

__all__ = [
    "MAX_VALIDATION_ATTEMPTS",
    "EpisodeResult",
    "IsolationError",
    "RunConfig",
    "RunResult",
    "SchemaError",
    "SnapshotCache",
    "TaskSpec",
    "ValidationResult",
    "default_fixtures_path",
    "default_tasks_path",
    "load_tasks",
    "report",
    "run",
    "run_task",
    "select",
    "validate_task",
]
