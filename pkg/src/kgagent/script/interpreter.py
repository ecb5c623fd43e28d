"""Budgeted, read-only evaluator for graph scripts."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Any, Callable

from kgagent.script.parser import (
    BinOp, Call, Lambda, Let, ListExpr, Lit, Neg, Not, Program, Var, parse_expression,
)
from kgagent.store import Graph
from kgagent.values import compare, format_value, kind, values_equal

DEFAULT_BUDGET = 10_000
DEFAULT_TIMEOUT = 5.0
INT64_MAX = 2**63 - 1

GRAPH_FUNCTIONS = frozenset({"nodes_by_label", "property_of", "neighbors", "edge_count", "label_of"})


class ScriptError(Exception):
    """A trapped runtime error; ``step`` is the 0-based index of the failing let."""

    def __init__(self, message: str, step: int | None = None):
        self.message = message
        self.step = step
        where = f"step {step}: " if step is not None else ""
        super().__init__(where + message)


class BudgetExceeded(ScriptError):
    pass


class ScriptTimeout(ScriptError):
    pass


@dataclass(frozen=True)
class NodeRef:
    id: int

    def __str__(self) -> str:
        return f"node({self.id})"


@dataclass(frozen=True)
class _Closure:
    param: str
    body: Any
    env: dict


@dataclass
class Execution:
    value: Any
    steps: int


class _Trap(Exception):
    pass


def _number(v: Any, what: str) -> int | float:
    if kind(v) != "number":
        raise _Trap(f"{what} expects a number, got {_describe(v)}")
    return v


def _describe(v: Any) -> str:
    if isinstance(v, NodeRef):
        return "node"
    if isinstance(v, _Closure):
        return "function"
    return kind(v)


def _check_number(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        raise _Trap("arithmetic produced a non-finite number")
    if isinstance(v, int) and not isinstance(v, bool) and abs(v) > INT64_MAX:
        raise _Trap("integer overflow")
    return v


class Interpreter:
    def __init__(self, graph: Graph | None, budget: int = DEFAULT_BUDGET,
                 timeout: float = DEFAULT_TIMEOUT, clock: Callable[[], float] = time.monotonic):
        self.graph = graph
        self.budget = budget
        self.timeout = timeout
        self.clock = clock
        self.steps = 0
        self.deadline = 0.0

    def charge(self, n: int = 1) -> None:
        self.steps += n
        if self.steps > self.budget:
            raise BudgetExceeded(f"step budget of {self.budget} exhausted")
        if self.clock() > self.deadline:
            raise ScriptTimeout(f"timed out after {self.timeout} s")

    def run(self, program: Program) -> Execution:
        self.deadline = self.clock() + self.timeout
        env: dict[str, Any] = {}
        for i, step in enumerate(program.steps):
            try:
                env[step.name] = self.eval(step.expr, env)
            except _Trap as exc:
                raise ScriptError(str(exc), i) from None
            except ScriptError as exc:
                exc.step = i
                exc.args = (f"step {i}: {exc.message}",)
                raise
        result = env["result"]
        if isinstance(result, (NodeRef, _Closure)) or (
                isinstance(result, list) and any(isinstance(v, (NodeRef, _Closure)) for v in result)):
            raise ScriptError("result must be a plain value, not a node or function",
                              len(program.steps) - 1)
        return Execution(result, self.steps)

    # -- evaluation -------------------------------------------------------------

    def eval(self, expr: Any, env: dict[str, Any]) -> Any:
        self.charge()
        if isinstance(expr, Lit):
            return expr.value
        if isinstance(expr, Var):
            return env[expr.name]
        if isinstance(expr, ListExpr):
            return [self.eval(item, env) for item in expr.items]
        if isinstance(expr, Lambda):
            return _Closure(expr.param, expr.body, env)
        if isinstance(expr, Not):
            v = self.eval(expr.operand, env)
            if not isinstance(v, bool):
                raise _Trap(f"not expects a boolean, got {_describe(v)}")
            return not v
        if isinstance(expr, Neg):
            return _check_number(-_number(self.eval(expr.operand, env), "negation"))
        if isinstance(expr, BinOp):
            return self.binop(expr, env)
        if isinstance(expr, Call):
            return self.call(expr, env)
        raise _Trap(f"cannot evaluate {expr!r}")

    def apply(self, fn: Any, arg: Any) -> Any:
        if not isinstance(fn, _Closure):
            raise _Trap(f"expected a function, got {_describe(fn)}")
        return self.eval(fn.body, {**fn.env, fn.param: arg})

    def binop(self, expr: BinOp, env: dict[str, Any]) -> Any:
        op = expr.op
        if op in ("and", "or"):
            left = self.eval(expr.left, env)
            if not isinstance(left, bool):
                raise _Trap(f"{op} expects booleans, got {_describe(left)}")
            if (op == "and" and not left) or (op == "or" and left):
                return left
            right = self.eval(expr.right, env)
            if not isinstance(right, bool):
                raise _Trap(f"{op} expects booleans, got {_describe(right)}")
            return right
        left = self.eval(expr.left, env)
        right = self.eval(expr.right, env)
        if op == "==":
            return _equal(left, right)
        if op == "!=":
            return not _equal(left, right)
        if op in ("<", ">", "<=", ">="):
            order = compare(left, right)
            if order is None:
                raise _Trap(f"cannot order {_describe(left)} and {_describe(right)}")
            return {"<": order < 0, ">": order > 0, "<=": order <= 0, ">=": order >= 0}[op]
        return arithmetic(op, left, right)

    def call(self, expr: Call, env: dict[str, Any]) -> Any:
        name = expr.name
        if name == "if":
            if len(expr.args) != 3:
                raise _Trap("if expects 3 arguments")
            cond = self.eval(expr.args[0], env)
            if not isinstance(cond, bool):
                raise _Trap(f"if expects a boolean condition, got {_describe(cond)}")
            return self.eval(expr.args[1] if cond else expr.args[2], env)
        spec = _FUNCTIONS.get(name)
        if spec is None:
            raise _Trap(f"unknown function {name!r}")
        lo, hi, impl = spec
        if not lo <= len(expr.args) <= hi:
            arity = str(lo) if lo == hi else f"{lo} to {hi}"
            raise _Trap(f"{name} expects {arity} arguments, got {len(expr.args)}")
        if name in GRAPH_FUNCTIONS and self.graph is None:
            raise _Trap(f"{name} needs a graph")
        args = [self.eval(a, env) for a in expr.args]
        return impl(self, *args)


def _equal(a: Any, b: Any) -> bool:
    if isinstance(a, NodeRef) or isinstance(b, NodeRef):
        return a == b
    if a is None or b is None:
        return a is None and b is None
    return values_equal(a, b)


def arithmetic(op: str, left: Any, right: Any) -> Any:
    a = _number(left, op)
    b = _number(right, op)
    if op == "+":
        return _check_number(a + b)
    if op == "-":
        return _check_number(a - b)
    if op in ("*", "×"):
        return _check_number(a * b)
    if op in ("/", "÷"):
        if b == 0:
            raise _Trap("division by zero")
        if isinstance(a, int) and isinstance(b, int) and a % b == 0:
            return _check_number(a // b)
        return _check_number(a / b)
    raise _Trap(f"unknown operator {op!r}")


# -- built-in functions ---------------------------------------------------------

def _list(v: Any, fn: str) -> list:
    if not isinstance(v, list):
        raise _Trap(f"{fn} expects a list, got {_describe(v)}")
    return v


def _int(v: Any, fn: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        if isinstance(v, float) and v.is_integer():
            return int(v)
        raise _Trap(f"{fn} expects an integer, got {_describe(v)}")
    return v


def _text(v: Any, fn: str) -> str:
    if not isinstance(v, str):
        raise _Trap(f"{fn} expects text, got {_describe(v)}")
    return v


def _node(v: Any, fn: str) -> NodeRef:
    if not isinstance(v, NodeRef):
        raise _Trap(f"{fn} expects a node, got {_describe(v)}")
    return v


def _sortable(it: Interpreter, xs: list, key, fn: str) -> list:
    it.charge(len(xs))
    keys = [it.apply(key, x) if key is not None else x for x in xs]
    kinds = {kind(k) for k in keys}
    if len(kinds) > 1 or (kinds and kinds.pop() not in ("number", "text", "bool")):
        raise _Trap(f"{fn} needs elements that are all numbers, all text or all booleans")
    order = sorted(range(len(xs)), key=lambda i: keys[i])
    return [xs[i] for i in order]


def f_sort_asc(it, xs, key=None):
    return _sortable(it, _list(xs, "sort_asc"), key, "sort_asc")


def f_sort_desc(it, xs, key=None):
    return list(reversed(_sortable(it, _list(xs, "sort_desc"), key, "sort_desc")))


def f_map(it, xs, fn):
    return [it.apply(fn, x) for x in _list(xs, "map")]


def f_filter(it, xs, fn):
    out = []
    for x in _list(xs, "filter"):
        keep = it.apply(fn, x)
        if not isinstance(keep, bool):
            raise _Trap("filter predicate must return a boolean")
        if keep:
            out.append(x)
    return out


def f_index(it, xs, i):
    if isinstance(xs, str):
        seq = xs
    else:
        seq = _list(xs, "index")
    i = _int(i, "index")
    if not 0 <= i < len(seq):
        raise _Trap(f"index {i} out of range for length {len(seq)}")
    return seq[i]


def f_slice(it, xs, start, end=None):
    seq = xs if isinstance(xs, str) else _list(xs, "slice")
    start = _int(start, "slice")
    end = len(seq) if end is None else _int(end, "slice")
    return seq[start:end]


def f_sum(it, xs):
    xs = _list(xs, "sum")
    it.charge(len(xs))
    total: int | float = 0
    for x in xs:
        total = _check_number(total + _number(x, "sum"))
    return total


def f_join(it, xs, sep=""):
    xs = _list(xs, "join")
    it.charge(len(xs))
    return _text(sep, "join").join(_to_text(x) for x in xs)


def f_length(it, xs):
    if isinstance(xs, (str, list)):
        return len(xs)
    raise _Trap(f"length expects a list or text, got {_describe(xs)}")


def f_range(it, a, b=None):
    start, stop = (0, _int(a, "range")) if b is None else (_int(a, "range"), _int(b, "range"))
    it.charge(max(0, stop - start))
    return list(range(start, stop))


def f_mod(it, a, b):
    a, b = _number(a, "mod"), _number(b, "mod")
    if b == 0:
        raise _Trap("division by zero")
    return _check_number(a % b)


def f_round(it, x, digits=0):
    x = _number(x, "round")
    digits = _int(digits, "round")
    if isinstance(x, int) and digits >= 0:
        return x
    out = round(x, digits)
    return int(out) if digits <= 0 else out


def f_pow(it, a, b):
    a, b = _number(a, "pow"), _number(b, "pow")
    if a == 0 and b < 0:
        raise _Trap("division by zero")
    if abs(a) > 1 and b > 0 and b * math.log2(abs(a)) > 1100:
        raise _Trap("integer overflow" if isinstance(a, int) and isinstance(b, int)
                    else "arithmetic produced a non-finite number")
    if isinstance(a, int) and isinstance(b, int) and b < 0:
        return _check_number(float(a) ** b)
    out = a ** b
    if isinstance(out, complex):
        raise _Trap("pow produced a complex number")
    return _check_number(out)


def _fold(name: str, pick):
    def impl(it, *args):
        items = _list(args[0], name) if len(args) == 1 else list(args)
        if not items:
            raise _Trap(f"{name} of an empty list")
        it.charge(len(items))
        best = items[0]
        for x in items[1:]:
            order = compare(x, best)
            if order is None:
                raise _Trap(f"{name} needs comparable values")
            if pick(order):
                best = x
        return best
    return impl


def f_abs(it, x):
    return abs(_number(x, "abs"))


def f_concat(it, *parts):
    return "".join(_to_text(p) for p in parts)


def f_lower(it, s):
    return _text(s, "lower").lower()


def f_upper(it, s):
    return _text(s, "upper").upper()


def f_contains(it, hay, needle):
    if isinstance(hay, str):
        return _text(needle, "contains") in hay
    return any(_equal(x, needle) for x in _list(hay, "contains"))


def _to_text(v: Any) -> str:
    if isinstance(v, (NodeRef, _Closure)):
        raise _Trap(f"cannot convert a {_describe(v)} to text")
    return format_value(v)


def f_to_text(it, v):
    return _to_text(v)


def f_to_number(it, v):
    if kind(v) == "number":
        return v
    text = _text(v, "to_number").strip().replace(",", "")
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return _check_number(float(text))
    except ValueError:
        raise _Trap(f"cannot convert {v!r} to a number") from None


def f_nodes_by_label(it, label):
    ids = it.graph.node_ids(_text(label, "nodes_by_label"))
    it.charge(len(ids))
    return [NodeRef(i) for i in ids]


def f_property_of(it, node, key):
    node = _node(node, "property_of")
    props = it.graph.node(node.id).properties
    key = _text(key, "property_of")
    if key not in props:
        raise _Trap(f"node {node.id} has no property {key!r}")
    value = props[key]
    return list(value) if isinstance(value, list) else value


def f_label_of(it, node):
    return it.graph.node(_node(node, "label_of").id).label


def f_neighbors(it, node, label=None, direction="out"):
    node = _node(node, "neighbors")
    if label is not None:
        _text(label, "neighbors")
    if direction not in ("out", "in", "both"):
        raise _Trap("neighbors direction must be 'out', 'in' or 'both'")
    rels = []
    if direction in ("out", "both"):
        rels += [(r.id, r.target) for r in it.graph.outgoing(node.id) if label is None or r.label == label]
    if direction in ("in", "both"):
        rels += [(r.id, r.source) for r in it.graph.incoming(node.id) if label is None or r.label == label]
    rels.sort()
    it.charge(len(rels))
    return [NodeRef(other) for _, other in rels]


def f_edge_count(it, label=None):
    if label is None:
        return it.graph.relationship_count
    label = _text(label, "edge_count")
    return sum(1 for r in it.graph.relationships() if r.label == label)


_FUNCTIONS: dict[str, tuple[int, int, Callable]] = {
    "nodes_by_label": (1, 1, f_nodes_by_label),
    "property_of": (2, 2, f_property_of),
    "label_of": (1, 1, f_label_of),
    "neighbors": (1, 3, f_neighbors),
    "edge_count": (0, 1, f_edge_count),
    "sort_asc": (1, 2, f_sort_asc),
    "sort_desc": (1, 2, f_sort_desc),
    "map": (2, 2, f_map),
    "filter": (2, 2, f_filter),
    "index": (2, 2, f_index),
    "slice": (2, 3, f_slice),
    "sum": (1, 1, f_sum),
    "join": (1, 2, f_join),
    "length": (1, 1, f_length),
    "range": (1, 2, f_range),
    "mod": (2, 2, f_mod),
    "round": (1, 2, f_round),
    "pow": (2, 2, f_pow),
    "min": (1, 64, _fold("min", lambda o: o < 0)),
    "max": (1, 64, _fold("max", lambda o: o > 0)),
    "abs": (1, 1, f_abs),
    "concat": (1, 64, f_concat),
    "lower": (1, 1, f_lower),
    "upper": (1, 1, f_upper),
    "contains": (2, 2, f_contains),
    "to_text": (1, 1, f_to_text),
    "to_number": (1, 1, f_to_number),
}

FUNCTION_NAMES = frozenset(_FUNCTIONS) | {"if"}


def execute(program: Program, graph: Graph | None, budget: int = DEFAULT_BUDGET,
            timeout: float = DEFAULT_TIMEOUT) -> Execution:
    return Interpreter(graph, budget, timeout).run(program)


def run_program(program: Program, graph: Graph | None, budget: int = DEFAULT_BUDGET,
                timeout: float = DEFAULT_TIMEOUT) -> Any:
    """Run ``program`` read-only against ``graph`` and return ``result``."""
    return execute(program, graph, budget, timeout).value


def _graph_calls(expr: Any) -> list[str]:
    found, stack = [], [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Call):
            if node.name in GRAPH_FUNCTIONS:
                found.append(node.name)
            stack.extend(node.args)
        elif isinstance(node, BinOp):
            stack.extend([node.left, node.right])
        elif isinstance(node, (Not, Neg)):
            stack.append(node.operand)
        elif isinstance(node, ListExpr):
            stack.extend(node.items)
        elif isinstance(node, Lambda):
            stack.append(node.body)
    return found


def eval_math(text: str, budget: int = DEFAULT_BUDGET, timeout: float = DEFAULT_TIMEOUT) -> Any:
    """Evaluate a single graph-free expression such as ``23 + 42``."""
    expr = parse_expression(text)
    used = _graph_calls(expr)
    if used:
        raise ScriptError(f"graph accessor {used[0]!r} is not allowed in a math expression")
    return run_program(Program((Let("result", expr),)), None, budget, timeout)


def format_result(value: Any) -> str:
    return format_value(value)
