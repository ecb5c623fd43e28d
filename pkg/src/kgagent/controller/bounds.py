"""Worst-case model-call counts for the controller, in closed form.

These mirror the loop in ``engine`` exactly; the acceptance tests compare a
scripted worst-case run's ledger against them.
"""

from __future__ import annotations

from kgagent.controller.config import ControllerConfig


def vote_calls(config: ControllerConfig) -> int:
    return config.num_next_steps_decision


def enhance_calls(config: ControllerConfig, *, merges: int = 1, model_tool_calls: int = 0,
                  insert_lists: int = 0, insert_prompt: bool = True) -> int:
    """Calls in one ENHANCE iteration, including its vote.

    ``model_tool_calls`` counts tool calls that talk to the model and fail on
    every attempt; ``insert_lists`` counts lists that exhaust their fixes.
    """
    return (vote_calls(config) + merges + 1
            + model_tool_calls * config.max_tool_retries
            + (1 if insert_prompt else 0)
            + insert_lists * config.max_cypher_fixing_retry)


def read_calls(config: ControllerConfig, *, generated: bool, regenerate: bool = True) -> int:
    """Calls for one read candidate that never yields a result."""
    fixes = config.max_cypher_fixing_retry
    regens = config.max_retrieve_query_retry if regenerate else 0
    return (1 if generated else 0) + regens + (regens + 1) * fixes


def postprocess_calls(config: ControllerConfig, math: bool = True) -> int:
    return 1 + (1 if math else 0) + config.max_final_solution_parsing


def forced_calls(config: ControllerConfig, math: bool = True) -> int:
    """Forced solution whose query never succeeds, then direct retrieval and post-processing."""
    direct = 1
    if config.solve_mode == "DIRECT":
        return direct + postprocess_calls(config, math)
    return read_calls(config, generated=True, regenerate=False) + direct + postprocess_calls(config, math)


def always_enhance_bound(config: ControllerConfig, **per_iteration: int) -> int:
    """Total calls when every vote says INSERT until the iteration cap."""
    return config.max_iterations * enhance_calls(config, **per_iteration) + forced_calls(config)
