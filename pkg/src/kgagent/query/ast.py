"""KGQL syntax tree and its canonical printer.

``format_query`` emits single-space canonical text; parsing that text gives
back an equal tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Union

from kgagent.query.lexer import BOOLEANS, KEYWORDS

Props = tuple[tuple[str, Any], ...]


@dataclass(frozen=True)
class NodePattern:
    variable: str | None = None
    label: str | None = None
    properties: Props = ()


@dataclass(frozen=True)
class RelPattern:
    direction: str  # "out" for -[]->, "in" for <-[]-
    variable: str | None = None
    label: str | None = None
    properties: Props = ()


@dataclass(frozen=True)
class Pattern:
    nodes: tuple[NodePattern, ...]
    rels: tuple[RelPattern, ...] = ()


@dataclass(frozen=True)
class Literal:
    value: Any  # str | int | float | bool | tuple of those


@dataclass(frozen=True)
class PropertyRef:
    variable: str
    key: str


@dataclass(frozen=True)
class Comparison:
    op: str
    left: Union[PropertyRef, Literal]
    right: Union[PropertyRef, Literal]


@dataclass(frozen=True)
class BoolOp:
    op: str  # AND | OR
    operands: tuple["Expr", ...]


Expr = Union[Comparison, BoolOp]


@dataclass(frozen=True)
class Count:
    variable: str | None = None  # None means COUNT(*)


@dataclass(frozen=True)
class ReturnItem:
    expr: Union[PropertyRef, Count]
    alias: str | None = None

    @property
    def column(self) -> str:
        if self.alias:
            return self.alias
        if isinstance(self.expr, Count):
            return f"COUNT({self.expr.variable or '*'})"
        return f"{self.expr.variable}.{self.expr.key}"


@dataclass(frozen=True)
class MatchStatement:
    patterns: tuple[Pattern, ...]
    where: Expr | None = None
    returns: tuple[ReturnItem, ...] | None = None


@dataclass(frozen=True)
class CreateStatement:
    patterns: tuple[Pattern, ...]


@dataclass(frozen=True)
class SetItem:
    variable: str
    key: str
    value: Literal


@dataclass(frozen=True)
class MergeStatement:
    node: NodePattern
    set_items: tuple[SetItem, ...] = ()


Statement = Union[MatchStatement, CreateStatement, MergeStatement]


@dataclass(frozen=True)
class Query:
    statements: tuple[Statement, ...]

    @property
    def is_read(self) -> bool:
        return bool(self.statements) and all(isinstance(s, MatchStatement) for s in self.statements) \
            and self.statements[-1].returns is not None

    @property
    def is_write(self) -> bool:
        return any(isinstance(s, (CreateStatement, MergeStatement)) for s in self.statements)


# -- printing ----------------------------------------------------------------

_PLAIN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def format_name(name: str) -> str:
    if _PLAIN.match(name) and name.upper() not in KEYWORDS | BOOLEANS:
        return name
    return "`" + name.replace("`", "``") + "`"


def format_string(value: str) -> str:
    out = ["'"]
    for ch in value:
        if ch == "\\":
            out.append("\\\\")
        elif ch == "'":
            out.append("\\'")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append("'")
    return "".join(out)


def format_literal(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return format_string(value)
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return "[" + ", ".join(format_literal(v) for v in value) + "]"
    raise TypeError(f"cannot print literal {value!r}")


def _format_props(props: Props) -> str:
    return "{" + ", ".join(f"{format_name(k)}: {format_literal(v)}" for k, v in props) + "}"


def _format_element(var: str | None, label: str | None, props: Props) -> str:
    out = format_name(var) if var else ""
    if label is not None:
        out += ":" + format_name(label)
    if props:
        out += (" " if out else "") + _format_props(props)
    return out


def format_pattern(pattern: Pattern) -> str:
    parts = [f"({_format_element(*_node_fields(pattern.nodes[0]))})"]
    for rel, node in zip(pattern.rels, pattern.nodes[1:]):
        inner = _format_element(rel.variable, rel.label, rel.properties)
        if rel.direction == "out":
            parts.append(f"-[{inner}]->")
        else:
            parts.append(f"<-[{inner}]-")
        parts.append(f"({_format_element(*_node_fields(node))})")
    return "".join(parts)


def _node_fields(node: NodePattern):
    return node.variable, node.label, node.properties


def _format_operand(op: Union[PropertyRef, Literal]) -> str:
    if isinstance(op, PropertyRef):
        return f"{format_name(op.variable)}.{format_name(op.key)}"
    return format_literal(op.value)


def format_expr(expr: Expr) -> str:
    if isinstance(expr, Comparison):
        return f"{_format_operand(expr.left)} {expr.op} {_format_operand(expr.right)}"
    parts = []
    for operand in expr.operands:
        text = format_expr(operand)
        parts.append(f"({text})" if isinstance(operand, BoolOp) else text)
    return f" {expr.op} ".join(parts)


def _format_return(item: ReturnItem) -> str:
    if isinstance(item.expr, Count):
        text = f"COUNT({format_name(item.expr.variable) if item.expr.variable else '*'})"
    else:
        text = _format_operand(item.expr)
    if item.alias:
        text += f" AS {format_name(item.alias)}"
    return text


def format_statement(stmt: Statement) -> str:
    if isinstance(stmt, MatchStatement):
        text = "MATCH " + ", ".join(format_pattern(p) for p in stmt.patterns)
        if stmt.where is not None:
            text += " WHERE " + format_expr(stmt.where)
        if stmt.returns is not None:
            text += " RETURN " + ", ".join(_format_return(r) for r in stmt.returns)
        return text
    if isinstance(stmt, CreateStatement):
        return "CREATE " + ", ".join(format_pattern(p) for p in stmt.patterns)
    text = "MERGE " + format_pattern(Pattern((stmt.node,)))
    if stmt.set_items:
        text += " SET " + ", ".join(
            f"{format_name(s.variable)}.{format_name(s.key)} = {format_literal(s.value.value)}"
            for s in stmt.set_items)
    return text


def format_query(query: Query) -> str:
    return " ".join(format_statement(s) for s in query.statements)
