from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterator

from kgagent.query.ast import (
    BoolOp, Count, CreateStatement, Literal, MatchStatement, MergeStatement,
    NodePattern, Pattern, Query, RelPattern,
)
from kgagent.store import Graph, GraphError
from kgagent.values import compare, format_value, values_equal

_MISSING = object()


class QueryError(Exception):
    """Raised when a parsed query cannot be executed against a graph."""


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[tuple]

    def is_empty(self) -> bool:
        return not self.rows or all(v is None for row in self.rows for v in row)

    def to_text(self) -> str:
        """Render as answer text: one column joins values with ", ", wider
        tables give one ``name: value`` line group per row."""
        if len(self.columns) == 1:
            return ", ".join(format_value(row[0]) for row in self.rows if row[0] is not None)
        lines = []
        for row in self.rows:
            lines.append(", ".join(f"{c}: {format_value(v)}" for c, v in zip(self.columns, row)))
        return "\n".join(lines)


@dataclass
class WriteSummary:
    nodes_created: int = 0
    nodes_merged: int = 0
    relationships_created: int = 0
    properties_set: int = 0
    ambiguous_merges: int = 0

    def as_dict(self) -> dict[str, int]:
        return dict(self.__dict__)


@dataclass
class _Row:
    bindings: dict[str, int]
    node_key: tuple = ()
    rel_key: tuple = ()
    used: frozenset = field(default_factory=frozenset)


def _prop(props: dict[str, Any], key: str) -> Any:
    return props.get(key, _MISSING)


def _props_match(props: dict[str, Any], wanted) -> bool:
    return all(values_equal(_prop(props, k), _literal_value(v)) for k, v in wanted)


def _literal_value(value: Any) -> Any:
    return list(value) if isinstance(value, tuple) else value


def _node_ok(graph: Graph, node_id: int, pat: NodePattern, row: _Row) -> bool:
    if pat.variable is not None and pat.variable in row.bindings and row.bindings[pat.variable] != node_id:
        return False
    node = graph.node(node_id)
    if pat.label is not None and node.label != pat.label:
        return False
    return _props_match(node.properties, pat.properties)


def _bind(row: _Row, var: str | None, element_id: int, node: bool, rel_used: int | None = None) -> _Row:
    bindings = row.bindings
    if var is not None and var not in bindings:
        bindings = {**bindings, var: element_id}
    if node:
        return _Row(bindings, row.node_key + (element_id,), row.rel_key, row.used)
    return _Row(bindings, row.node_key, row.rel_key + (element_id,), row.used | {rel_used})


def _match_pattern(graph: Graph, pattern: Pattern, row: _Row) -> Iterator[_Row]:
    first = pattern.nodes[0]
    if first.variable is not None and first.variable in row.bindings:
        starts = [row.bindings[first.variable]]
    else:
        starts = graph.node_ids(first.label)
    for start in starts:
        if _node_ok(graph, start, first, row):
            yield from _extend(graph, pattern, 0, start, _bind(row, first.variable, start, True))


def _extend(graph: Graph, pattern: Pattern, hop: int, current: int, row: _Row) -> Iterator[_Row]:
    if hop == len(pattern.rels):
        yield row
        return
    rel_pat: RelPattern = pattern.rels[hop]
    node_pat = pattern.nodes[hop + 1]
    edges = graph.outgoing(current) if rel_pat.direction == "out" else graph.incoming(current)
    for rel in edges:
        if rel.id in row.used:
            continue
        if rel_pat.label is not None and rel.label != rel_pat.label:
            continue
        if rel_pat.variable is not None and rel_pat.variable in row.bindings \
                and row.bindings[rel_pat.variable] != rel.id:
            continue
        if not _props_match(rel.properties, rel_pat.properties):
            continue
        nxt = rel.target if rel_pat.direction == "out" else rel.source
        if not _node_ok(graph, nxt, node_pat, row):
            continue
        bound = _bind(row, rel_pat.variable, rel.id, False, rel.id)
        yield from _extend(graph, pattern, hop + 1, nxt, _bind(bound, node_pat.variable, nxt, True))


def _element_props(graph: Graph, kinds: dict[str, str], row: _Row, var: str) -> dict[str, Any]:
    if var not in row.bindings:
        raise QueryError(f"internal error: variable {var!r} is unbound")
    if kinds[var] == "rel":
        return graph.relationship(row.bindings[var]).properties
    return graph.node(row.bindings[var]).properties


def _operand(graph, kinds, row, op) -> Any:
    if isinstance(op, Literal):
        return _literal_value(op.value)
    return _prop(_element_props(graph, kinds, row, op.variable), op.key)


def _holds(graph, kinds, row, expr) -> bool:
    if isinstance(expr, BoolOp):
        if expr.op == "AND":
            return all(_holds(graph, kinds, row, e) for e in expr.operands)
        return any(_holds(graph, kinds, row, e) for e in expr.operands)
    left = _operand(graph, kinds, row, expr.left)
    right = _operand(graph, kinds, row, expr.right)
    if left is _MISSING or right is _MISSING:
        return False
    if expr.op == "=":
        return values_equal(left, right)
    if expr.op == "<>":
        return not values_equal(left, right)
    order = compare(left, right)
    if order is None:
        return False
    return {"<": order < 0, ">": order > 0, "<=": order <= 0, ">=": order >= 0}[expr.op]


def _variable_kinds(query: Query) -> dict[str, str]:
    kinds: dict[str, str] = {}
    for stmt in query.statements:
        patterns = (Pattern((stmt.node,)),) if isinstance(stmt, MergeStatement) else stmt.patterns
        for pattern in patterns:
            for node in pattern.nodes:
                if node.variable:
                    kinds.setdefault(node.variable, "node")
            for rel in pattern.rels:
                if rel.variable:
                    kinds.setdefault(rel.variable, "rel")
    return kinds


def _run_match(graph: Graph, kinds, stmt: MatchStatement, rows: list[_Row]) -> list[_Row]:
    out = []
    for row in rows:
        partial = [_Row(row.bindings, row.node_key, row.rel_key, frozenset())]
        for pattern in stmt.patterns:
            partial = [r for p in partial for r in _match_pattern(graph, pattern, p)]
        for r in partial:
            if stmt.where is None or _holds(graph, kinds, r, stmt.where):
                out.append(r)
    return out


def _group_key(values: tuple) -> str:
    return json.dumps(values, sort_keys=True, default=str)


def _project(graph: Graph, kinds, stmt: MatchStatement, rows: list[_Row]) -> ResultTable:
    items = stmt.returns
    columns = [item.column for item in items]
    rows = sorted(rows, key=lambda r: (r.node_key, r.rel_key))

    def value(item, row):
        val = _operand(graph, kinds, row, item.expr)
        return None if val is _MISSING else val

    if not any(isinstance(item.expr, Count) for item in items):
        return ResultTable(columns, [tuple(value(item, r) for item in items) for r in rows])
    plain = [i for i, item in enumerate(items) if not isinstance(item.expr, Count)]
    groups: dict[str, list] = {}
    order: list[str] = []
    if not plain:
        groups[_group_key(())] = [(), 0]
        order.append(_group_key(()))
    for r in rows:
        key_values = tuple(value(items[i], r) for i in plain)
        key = _group_key(key_values)
        if key not in groups:
            groups[key] = [key_values, 0]
            order.append(key)
        groups[key][1] += 1
    out = []
    for key in order:
        key_values, count = groups[key]
        it = iter(key_values)
        out.append(tuple(count if isinstance(item.expr, Count) else next(it) for item in items))
    return ResultTable(columns, out)


def execute_read(query: Query, graph: Graph) -> ResultTable:
    """Evaluate a MATCH ... RETURN statement list without touching the graph."""
    if not query.is_read:
        raise QueryError("read queries may only contain MATCH statements and must end with RETURN")
    kinds = _variable_kinds(query)
    rows = [_Row({})]
    for stmt in query.statements:
        rows = _run_match(graph, kinds, stmt, rows)
    return _project(graph, kinds, query.statements[-1], rows)


def _create(graph: Graph, stmt: CreateStatement, row: _Row, summary: WriteSummary) -> _Row:
    bindings = dict(row.bindings)
    for pattern in stmt.patterns:
        ids = []
        for node in pattern.nodes:
            if node.variable is not None and node.variable in bindings:
                ids.append(bindings[node.variable])
                continue
            props = {k: _literal_value(v) for k, v in node.properties}
            node_id = graph.add_node(node.label, props)
            summary.nodes_created += 1
            if node.variable is not None:
                bindings[node.variable] = node_id
            ids.append(node_id)
        for i, rel in enumerate(pattern.rels):
            src, dst = ids[i], ids[i + 1]
            if rel.direction == "in":
                src, dst = dst, src
            props = {k: _literal_value(v) for k, v in rel.properties}
            rel_id = graph.add_relationship(src, dst, rel.label or "", props)
            summary.relationships_created += 1
            if rel.variable is not None:
                bindings[rel.variable] = rel_id
    return _Row(bindings, row.node_key, row.rel_key)


def _merge(graph: Graph, stmt: MergeStatement, row: _Row, summary: WriteSummary) -> _Row:
    node = stmt.node
    match = {k: _literal_value(v) for k, v in node.properties}
    extra = {s.key: _literal_value(s.value.value) for s in stmt.set_items}
    result = graph.merge_node(node.label, match, extra)
    if result.created:
        summary.nodes_created += 1
    else:
        summary.nodes_merged += 1
        summary.properties_set += len(extra)
    if result.ambiguous:
        summary.ambiguous_merges += 1
    bindings = dict(row.bindings)
    if node.variable is not None:
        bindings[node.variable] = result.node_id
    return _Row(bindings, row.node_key, row.rel_key)


def execute_write(query: Query, graph: Graph) -> WriteSummary:
    """Apply a CREATE/MERGE statement list atomically.

    A leading MATCH binds endpoints; the following clauses run once per
    matched row. Any failure rolls the whole list back and raises QueryError.
    """
    if not query.is_write:
        raise QueryError("write statement lists need at least one CREATE or MERGE")
    if any(isinstance(s, MatchStatement) and s.returns is not None for s in query.statements):
        raise QueryError("RETURN is not allowed in write statement lists")
    kinds = _variable_kinds(query)
    summary = WriteSummary()
    try:
        with graph.transaction():
            rows = [_Row({})]
            for stmt in query.statements:
                if isinstance(stmt, MatchStatement):
                    rows = _run_match(graph, kinds, stmt, rows)
                elif isinstance(stmt, CreateStatement):
                    rows = [_create(graph, stmt, r, summary) for r in rows]
                else:
                    rows = [_merge(graph, stmt, r, summary) for r in rows]
    except GraphError as exc:
        raise QueryError(str(exc)) from exc
    return summary
