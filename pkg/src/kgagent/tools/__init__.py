"""Tool registry, retrying invocation, built-in tools and stdio plugins."""

from kgagent.tools.builtins import BUILTINS, builtin_registry, load_corpus, search_corpus, table_markdown
from kgagent.tools.plugin import PluginProcess, register_plugin
from kgagent.tools.registry import (
    DEFAULT_TOOL_RETRIES, MAX_DESCRIPTION, ArgSpec, RegistryError, ToolArgumentError, ToolCall,
    ToolContext, ToolError, ToolOutput, ToolRegistry, ToolResult, ToolSpec, invoke_all,
    invoke_with_retry, register_tool,
)

__all__ = [
    "ArgSpec", "BUILTINS", "DEFAULT_TOOL_RETRIES", "MAX_DESCRIPTION", "PluginProcess",
    "RegistryError", "ToolArgumentError", "ToolCall", "ToolContext", "ToolError", "ToolOutput",
    "ToolRegistry", "ToolResult", "ToolSpec", "builtin_registry", "invoke_all",
    "invoke_with_retry", "load_corpus", "register_plugin", "register_tool", "search_corpus",
    "table_markdown",
]
