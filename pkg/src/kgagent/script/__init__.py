"""Graph scripts: a small deterministic language for computing answers from the graph."""

from kgagent.script.interpreter import (
    BudgetExceeded, Execution, NodeRef, ScriptError, ScriptTimeout, eval_math, execute,
    format_result, run_program,
)
from kgagent.script.parser import (
    Program, ScriptSyntaxError, format_expr, format_program, parse_expression, parse_program,
)

__all__ = [
    "BudgetExceeded", "Execution", "NodeRef", "Program", "ScriptError", "ScriptSyntaxError",
    "ScriptTimeout", "eval_math", "execute", "format_expr", "format_program", "format_result",
    "parse_expression", "parse_program", "run_program",
]
