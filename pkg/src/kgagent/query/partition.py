"""Split write batches into independent chains and run them concurrently.

Two statement lists depend on each other when any node pattern of one could
describe a node touched by the other: same label (or an unlabelled pattern)
and no shared property key with conflicting values. The test is static and
conservative, so it can only cost parallelism.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

from kgagent.query.ast import CreateStatement, MatchStatement, MergeStatement, Query
from kgagent.query.evaluator import QueryError, WriteSummary, execute_write
from kgagent.store import Graph
from kgagent.values import values_equal


@dataclass(frozen=True)
class Signature:
    label: str | None
    properties: tuple[tuple[str, Any], ...] = ()

    def overlaps(self, other: "Signature") -> bool:
        if self.label is not None and other.label is not None and self.label != other.label:
            return False
        mine = dict(self.properties)
        for key, value in other.properties:
            if key in mine and not values_equal(_plain(mine[key]), _plain(value)):
                return False
        return True


def _plain(value: Any) -> Any:
    return list(value) if isinstance(value, tuple) else value


def signatures(query: Query) -> list[Signature]:
    """Node signatures of every node pattern that selects or creates nodes."""
    bound: set[str] = set()
    out: list[Signature] = []
    for stmt in query.statements:
        if isinstance(stmt, MergeStatement):
            nodes = [stmt.node]
        else:
            nodes = [n for p in stmt.patterns for n in p.nodes]
        for node in nodes:
            reference = node.variable in bound and node.label is None and not node.properties
            if not reference:
                out.append(Signature(node.label, node.properties))
            if node.variable:
                bound.add(node.variable)
    return out


def dependency_chains(lists: list[Query]) -> list[list[int]]:
    """Group statement-list indices into mutually independent chains."""
    parent = list(range(len(lists)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    sigs = [signatures(q) for q in lists]
    for i in range(len(lists)):
        for j in range(i):
            if find(i) != find(j) and any(a.overlaps(b) for a in sigs[i] for b in sigs[j]):
                parent[find(i)] = find(j)
    chains: dict[int, list[int]] = {}
    for i in range(len(lists)):
        chains.setdefault(find(i), []).append(i)
    return sorted(chains.values(), key=lambda c: c[0])


def partition_independent(lists: list[Query]) -> list[list[Query]]:
    for q in lists:
        if any(isinstance(s, MatchStatement) and s.returns is not None for s in q.statements) \
                or not any(isinstance(s, (CreateStatement, MergeStatement)) for s in q.statements):
            raise ValueError("partition_independent only accepts write statement lists")
    return [[lists[i] for i in chain] for chain in dependency_chains(lists)]


def _run_chain(base: Graph, lists: list[Query], chain: list[int]):
    local = base.copy()
    out = {}
    for i in chain:
        local.journal = []
        try:
            summary = execute_write(lists[i], local)
        except QueryError as exc:
            out[i] = (exc, [])
        else:
            out[i] = (summary, local.journal)
    return out


def _replay(graph: Graph, journal: list[tuple], node_map: dict[int, int],
            base_nodes: int) -> None:
    def node_id(local: int) -> int:
        return local if local < base_nodes else node_map[local]

    for entry in journal:
        if entry[0] == "node":
            _, local, label, props = entry
            node_map[local] = graph.add_node(label, props)
        elif entry[0] == "rel":
            _, _, src, dst, label, props = entry
            graph.add_relationship(node_id(src), node_id(dst), label, props)
        elif entry[0] == "set":
            _, local, props = entry
            graph.set_properties(node_id(local), props)
        else:
            raise QueryError(f"cannot replay journal entry {entry[0]!r}")


def execute_chains(graph: Graph, lists: list[Query], max_workers: int | None = None
                   ) -> list[WriteSummary | QueryError]:
    """Run independent chains in parallel, then merge in original list order.

    Each chain executes against a private copy of ``graph``; the recorded
    mutations are replayed list by list in input order, so node and
    relationship ids come out exactly as in sequential execution.
    """
    chains = dependency_chains(lists)
    base_nodes = graph.next_node_id
    if len(chains) <= 1 or (max_workers is not None and max_workers <= 1):
        parts = [_run_chain(graph, lists, chain) for chain in chains]
    else:
        with ThreadPoolExecutor(max_workers=max_workers or len(chains)) as pool:
            parts = list(pool.map(lambda c: _run_chain(graph, lists, c), chains))
    owner = {i: k for k, chain in enumerate(chains) for i in chain}
    merged = {i: r for part in parts for i, r in part.items()}
    node_maps: list[dict[int, int]] = [{} for _ in chains]
    results: list[WriteSummary | QueryError] = []
    for i in range(len(lists)):
        outcome, journal = merged[i]
        if journal:
            with graph.transaction():
                _replay(graph, journal, node_maps[owner[i]], base_nodes)
        results.append(outcome)
    return results
