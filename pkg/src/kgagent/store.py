"""In-memory property graph holding the evolving task state.

Nodes carry exactly one label and a flat property map; relationships are
directed, labelled (possibly with the empty label) and may be parallel.
Ids are dense integers handed out in insertion order and renumbered on
export, so snapshots of equal graphs are byte-identical.
"""

from __future__ import annotations

import copy
import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, NamedTuple

from kgagent.values import values_equal

__all__ = [
    "Graph",
    "GraphError",
    "MergeResult",
    "Node",
    "PropertyError",
    "Relationship",
    "RemovalSummary",
    "SnapshotError",
    "export_snapshot",
    "find_duplicate_candidates",
    "import_snapshot",
    "render_graph_text",
    "validate_property_value",
]

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class GraphError(Exception):
    """Raised when a mutation would violate a graph invariant."""


class PropertyError(GraphError):
    """Raised for property values outside the supported value domain."""


class SnapshotError(GraphError):
    """Raised for malformed or inconsistent snapshot documents."""


@dataclass
class Node:
    id: int
    label: str
    properties: dict[str, Any] = field(default_factory=dict)


@dataclass
class Relationship:
    id: int
    source: int
    target: int
    label: str = ""
    properties: dict[str, Any] = field(default_factory=dict)


class MergeResult(NamedTuple):
    node_id: int
    created: bool
    ambiguous: bool = False


class RemovalSummary(NamedTuple):
    nodes_removed: int
    relationships_removed: int
    unknown_nodes: tuple[int, ...] = ()
    unknown_relationships: tuple[int, ...] = ()


def validate_property_value(value: Any, _depth: int = 0) -> Any:
    """Return a normalized copy of ``value`` or raise PropertyError.

    Accepted: str, bool, 64-bit int, finite float, and lists of those (one
    level of nesting). Tuples are turned into lists.
    """
    if isinstance(value, bool) or isinstance(value, str):
        return value
    if isinstance(value, int):
        if not INT64_MIN <= value <= INT64_MAX:
            raise PropertyError(f"integer out of 64-bit range: {value}")
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise PropertyError(f"non-finite real value: {value!r}")
        return value
    if isinstance(value, (list, tuple)):
        if _depth >= 1:
            raise PropertyError("lists may nest at most one level")
        return [validate_property_value(v, _depth + 1) for v in value]
    raise PropertyError(f"unsupported property value type: {type(value).__name__}")


def _validate_properties(properties: dict[str, Any] | None) -> dict[str, Any]:
    if properties is None:
        return {}
    if not isinstance(properties, dict):
        raise PropertyError("properties must be a mapping")
    out = {}
    for key, value in properties.items():
        if not isinstance(key, str) or not key:
            raise PropertyError(f"property names must be nonempty strings, got {key!r}")
        out[key] = validate_property_value(value)
    return out


class Graph:
    """Single-writer property graph with label and adjacency indexes.

    ``journal`` may be set to a list to record every mutation as a tuple;
    the query layer uses it to replay independent write chains.
    """

    def __init__(self) -> None:
        self._nodes: dict[int, Node] = {}
        self._rels: dict[int, Relationship] = {}
        self._out: dict[int, set[int]] = {}
        self._in: dict[int, set[int]] = {}
        self._by_label: dict[str, set[int]] = {}
        self._next_node = 0
        self._next_rel = 0
        self.journal: list[tuple] | None = None

    # -- reads ---------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def relationship_count(self) -> int:
        return len(self._rels)

    @property
    def next_node_id(self) -> int:
        return self._next_node

    def has_node(self, node_id: int) -> bool:
        return node_id in self._nodes

    def node(self, node_id: int) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise GraphError(f"unknown node id {node_id}") from None

    def relationship(self, rel_id: int) -> Relationship:
        try:
            return self._rels[rel_id]
        except KeyError:
            raise GraphError(f"unknown relationship id {rel_id}") from None

    def nodes(self) -> list[Node]:
        return [self._nodes[i] for i in sorted(self._nodes)]

    def relationships(self) -> list[Relationship]:
        return [self._rels[i] for i in sorted(self._rels)]

    def node_ids(self, label: str | None = None) -> list[int]:
        if label is None:
            return sorted(self._nodes)
        return sorted(self._by_label.get(label, ()))

    def labels(self) -> list[str]:
        return sorted(label for label, ids in self._by_label.items() if ids)

    def outgoing(self, node_id: int) -> list[Relationship]:
        return [self._rels[r] for r in sorted(self._out.get(node_id, ()))]

    def incoming(self, node_id: int) -> list[Relationship]:
        return [self._rels[r] for r in sorted(self._in.get(node_id, ()))]

    # -- writes --------------------------------------------------------------

    def _log(self, entry: tuple) -> None:
        if self.journal is not None:
            self.journal.append(entry)

    def _insert_node(self, node_id: int, label: str, properties: dict[str, Any]) -> None:
        self._nodes[node_id] = Node(node_id, label, properties)
        self._by_label.setdefault(label, set()).add(node_id)
        self._out[node_id] = set()
        self._in[node_id] = set()
        self._next_node = max(self._next_node, node_id + 1)

    def _insert_rel(self, rel_id: int, source: int, target: int, label: str,
                    properties: dict[str, Any]) -> None:
        self._rels[rel_id] = Relationship(rel_id, source, target, label, properties)
        self._out[source].add(rel_id)
        self._in[target].add(rel_id)
        self._next_rel = max(self._next_rel, rel_id + 1)

    def add_node(self, label: str, properties: dict[str, Any] | None = None) -> int:
        if not isinstance(label, str) or not label:
            raise GraphError("node label must be a nonempty string")
        props = _validate_properties(properties)
        node_id = self._next_node
        self._insert_node(node_id, label, props)
        self._log(("node", node_id, label, copy.deepcopy(props)))
        return node_id

    def add_relationship(self, source: int, target: int, label: str = "",
                         properties: dict[str, Any] | None = None) -> int:
        for end in (source, target):
            if end not in self._nodes:
                raise GraphError(f"relationship endpoint {end} does not exist")
        if not isinstance(label, str):
            raise GraphError("relationship label must be a string")
        props = _validate_properties(properties)
        rel_id = self._next_rel
        self._insert_rel(rel_id, source, target, label, props)
        self._log(("rel", rel_id, source, target, label, copy.deepcopy(props)))
        return rel_id

    def set_properties(self, node_id: int, properties: dict[str, Any]) -> None:
        node = self.node(node_id)
        props = _validate_properties(properties)
        node.properties.update(props)
        if props:
            self._log(("set", node_id, copy.deepcopy(props)))

    def find_nodes(self, label: str, match_properties: dict[str, Any]) -> list[int]:
        found = []
        for node_id in self.node_ids(label):
            props = self._nodes[node_id].properties
            if all(k in props and values_equal(props[k], v) for k, v in match_properties.items()):
                found.append(node_id)
        return found

    def merge_node(self, label: str, match_properties: dict[str, Any],
                   set_properties: dict[str, Any] | None = None) -> MergeResult:
        """Find-or-create a node keyed by ``label`` and ``match_properties``.

        Several existing matches resolve to the lowest id and are reported
        through ``MergeResult.ambiguous``.
        """
        if not match_properties:
            raise GraphError("merge requires at least one match property")
        match = _validate_properties(match_properties)
        extra = _validate_properties(set_properties)
        hits = self.find_nodes(label, match)
        if hits:
            if extra:
                self.set_properties(hits[0], extra)
            return MergeResult(hits[0], False, len(hits) > 1)
        return MergeResult(self.add_node(label, {**match, **extra}), True)

    def remove_elements(self, node_ids: Iterable[int] = (),
                        relationship_ids: Iterable[int] = ()) -> RemovalSummary:
        node_ids = set(node_ids)
        rel_ids = set(relationship_ids)
        unknown_nodes = tuple(sorted(n for n in node_ids if n not in self._nodes))
        unknown_rels = tuple(sorted(r for r in rel_ids if r not in self._rels))
        doomed_rels = {r for r in rel_ids if r in self._rels}
        doomed_nodes = {n for n in node_ids if n in self._nodes}
        for n in doomed_nodes:
            doomed_rels |= self._out[n] | self._in[n]
        for r in sorted(doomed_rels):
            rel = self._rels.pop(r)
            self._out[rel.source].discard(r)
            self._in[rel.target].discard(r)
            self._log(("remove_rel", r))
        for n in sorted(doomed_nodes):
            node = self._nodes.pop(n)
            self._by_label[node.label].discard(n)
            del self._out[n], self._in[n]
            self._log(("remove_node", n))
        return RemovalSummary(len(doomed_nodes), len(doomed_rels), unknown_nodes, unknown_rels)

    # -- state management ----------------------------------------------------

    def copy(self) -> "Graph":
        other = Graph()
        other._nodes = {i: Node(n.id, n.label, copy.deepcopy(n.properties))
                        for i, n in self._nodes.items()}
        other._rels = {i: Relationship(r.id, r.source, r.target, r.label,
                                       copy.deepcopy(r.properties))
                       for i, r in self._rels.items()}
        other._out = {k: set(v) for k, v in self._out.items()}
        other._in = {k: set(v) for k, v in self._in.items()}
        other._by_label = {k: set(v) for k, v in self._by_label.items()}
        other._next_node = self._next_node
        other._next_rel = self._next_rel
        return other

    def _restore(self, saved: "Graph") -> None:
        self._nodes, self._rels = saved._nodes, saved._rels
        self._out, self._in, self._by_label = saved._out, saved._in, saved._by_label
        self._next_node, self._next_rel = saved._next_node, saved._next_rel

    @contextmanager
    def transaction(self) -> Iterator["Graph"]:
        """Roll every mutation back if the block raises."""
        saved = self.copy()
        mark = len(self.journal) if self.journal is not None else 0
        try:
            yield self
        except BaseException:
            self._restore(saved)
            if self.journal is not None:
                del self.journal[mark:]
            raise

    def check_integrity(self) -> None:
        for rel in self._rels.values():
            if rel.source not in self._nodes or rel.target not in self._nodes:
                raise GraphError(f"relationship {rel.id} is dangling")


# -- snapshots ---------------------------------------------------------------

def snapshot_document(graph: Graph) -> dict[str, Any]:
    index = {n.id: i for i, n in enumerate(graph.nodes())}
    nodes = [{"id": index[n.id], "label": n.label, "properties": n.properties}
             for n in graph.nodes()]
    rels = [{"id": i, "source": index[r.source], "target": index[r.target],
             "label": r.label, "properties": r.properties}
            for i, r in enumerate(graph.relationships())]
    return {"nodes": nodes, "relationships": rels}


def export_snapshot(graph: Graph) -> str:
    """Serialize ``graph`` to the canonical JSON snapshot text."""
    return json.dumps(snapshot_document(graph), sort_keys=True, indent=2,
                      ensure_ascii=False) + "\n"


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_keys(obj: Any, keys: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise SnapshotError(f"{where}: expected an object")
    if set(obj) != keys:
        raise SnapshotError(f"{where}: expected keys {sorted(keys)}, got {sorted(obj)}")


def import_snapshot(document: str) -> Graph:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"{exc.lineno}:{exc.colno} {exc.msg}") from None
    _check_keys(doc, {"nodes", "relationships"}, "snapshot")
    if not isinstance(doc["nodes"], list) or not isinstance(doc["relationships"], list):
        raise SnapshotError("snapshot: nodes and relationships must be arrays")
    graph = Graph()
    for i, item in enumerate(doc["nodes"]):
        where = f"nodes[{i}]"
        _check_keys(item, {"id", "label", "properties"}, where)
        if not _is_int(item["id"]) or item["id"] < 0:
            raise SnapshotError(f"{where}: id must be a non-negative integer")
        if item["id"] in graph._nodes:
            raise SnapshotError(f"{where}: duplicate node id {item['id']}")
        if not isinstance(item["label"], str) or not item["label"]:
            raise SnapshotError(f"{where}: label must be a nonempty string")
        try:
            props = _validate_properties(item["properties"])
        except PropertyError as exc:
            raise SnapshotError(f"{where}: {exc}") from None
        graph._insert_node(item["id"], item["label"], props)
    for i, item in enumerate(doc["relationships"]):
        where = f"relationships[{i}]"
        _check_keys(item, {"id", "source", "target", "label", "properties"}, where)
        if not _is_int(item["id"]) or item["id"] < 0:
            raise SnapshotError(f"{where}: id must be a non-negative integer")
        if item["id"] in graph._rels:
            raise SnapshotError(f"{where}: duplicate relationship id {item['id']}")
        for end in ("source", "target"):
            if not _is_int(item[end]) or item[end] not in graph._nodes:
                raise SnapshotError(f"{where}: {end} refers to unknown node id {item[end]!r}")
        if not isinstance(item["label"], str):
            raise SnapshotError(f"{where}: label must be a string")
        try:
            props = _validate_properties(item["properties"])
        except PropertyError as exc:
            raise SnapshotError(f"{where}: {exc}") from None
        graph._insert_rel(item["id"], item["source"], item["target"], item["label"], props)
    return graph


# -- prompt rendering --------------------------------------------------------

def _group(items, key) -> list[tuple[str, list]]:
    groups: dict[str, list] = {}
    for item in items:
        groups.setdefault(key(item), []).append(item)
    return list(groups.items())


def _props_text(props: dict[str, Any]) -> str:
    return repr(dict(sorted(props.items())))


def render_graph_text(graph: Graph, style: str = "adjacency") -> str:
    """Render the graph for the ``existing_entities_and_relationships`` slot.

    ``adjacency`` produces the "Existing Nodes:" listing with one bracketed
    list per label; ``property_graph`` lists nodes one per line with their
    ``neo4j_id`` and spells out endpoint labels on relationships.
    """
    nodes = graph.nodes()
    rels = graph.relationships()
    node_groups = _group(nodes, lambda n: n.label)
    rel_groups = _group(rels, lambda r: r.label or "None")
    lines: list[str] = []
    if style == "adjacency":
        lines.append("Existing Nodes:")
        for label, members in node_groups:
            lines.append(f" Label: {label}")
            body = ", ".join(f"{{id:{n.id}, properties:{_props_text(n.properties)}}}" for n in members)
            lines.append(f"   [{body}]")
        lines.append("")
        lines.append("Existing Relationships:")
        for label, members in rel_groups:
            lines.append(f" Label: {label}")
            body = ", ".join(
                f"{{source: {{id: {r.source}}}, target: {{id: {r.target}}}, "
                f"properties: {_props_text(r.properties)}}}" for r in members)
            lines.append(f"   [{body}]")
    elif style == "property_graph":
        lines.append("Nodes:")
        for label, members in node_groups:
            lines.append(f"  Label: {label}")
            for n in members:
                lines.append(f"    {{neo4j_id:{n.id}, properties:{_props_text(n.properties)}}}")
        lines.append("Relationships:")
        for label, members in rel_groups:
            lines.append(f"  Label: {label}")
            for r in members:
                src, tgt = graph.node(r.source), graph.node(r.target)
                lines.append(
                    f"    {{source: {{neo4j_id: {src.id}, label: {src.label}}}, "
                    f"target: {{neo4j_id: {tgt.id}, label: {tgt.label}}}, "
                    f"properties: {_props_text(r.properties)}}}")
    else:
        raise ValueError(f"unknown render style {style!r}")
    return "\n".join(lines) + "\n"


# -- duplicate detection -----------------------------------------------------

def _norm_text(value: str) -> str:
    return " ".join(value.split()).casefold()


def _norm(value: Any) -> Any:
    if isinstance(value, str):
        return _norm_text(value)
    if isinstance(value, list):
        return [_norm(v) for v in value]
    return value


def edit_similarity(a: str, b: str) -> float:
    """1 - Levenshtein(a, b) / max(len(a), len(b)); 1.0 for two empty strings."""
    if a == b:
        return 1.0
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return 1.0 - prev[-1] / max(len(a), len(b))


def _is_duplicate(p: dict[str, Any], q: dict[str, Any], threshold: float) -> bool:
    shared = sorted(set(p) & set(q))
    if not shared:
        return False
    text_keys = [k for k in shared if isinstance(p[k], str) and isinstance(q[k], str)]
    fuzzy = None
    if text_keys:
        fuzzy = max(text_keys, key=lambda k: (max(len(_norm_text(p[k])), len(_norm_text(q[k]))), k))
    for key in shared:
        if key == fuzzy:
            if edit_similarity(_norm_text(p[key]), _norm_text(q[key])) < threshold:
                return False
        elif not values_equal(_norm(p[key]), _norm(q[key])):
            return False
    return True


def find_duplicate_candidates(graph: Graph, threshold: float = 0.9) -> list[tuple[int, int]]:
    """Pairs of same-label nodes whose property maps look like the same entity.

    Shared keys must agree after whitespace/case normalization, except the
    longest shared text property, which only needs an edit similarity of at
    least ``threshold``. Removal is left to the caller.
    """
    pairs = []
    for label in graph.labels():
        members = [graph.node(i) for i in graph.node_ids(label)]
        for i, a in enumerate(members):
            for b in members[i + 1:]:
                if _is_duplicate(a.properties, b.properties, threshold):
                    pairs.append((a.id, b.id))
    return pairs
