"""The agent loop and its configuration."""

from kgagent.controller.bounds import always_enhance_bound, enhance_calls, forced_calls, read_calls
from kgagent.controller.config import BACKENDS, SOLVE_MODES, ConfigError, ControllerConfig
from kgagent.controller.engine import (
    Controller, build_client, build_registry, decide, format_final, pick_majority, run_task,
)
from kgagent.controller.prompts import PromptLibrary, PromptTemplate, TemplateError
from kgagent.controller.state import NextStep, Step, TaskOutcome, TaskState, Trace, Vote

__all__ = [
    "BACKENDS", "SOLVE_MODES", "ConfigError", "Controller", "ControllerConfig", "NextStep",
    "PromptLibrary", "PromptTemplate", "Step", "TaskOutcome", "TaskState", "TemplateError", "Trace",
    "Vote", "always_enhance_bound", "build_client", "build_registry", "decide", "enhance_calls",
    "forced_calls", "format_final", "pick_majority", "read_calls", "run_task",
]
