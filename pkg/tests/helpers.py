"""Random graphs, random read queries and a brute-force match oracle.

The oracle works from a plain query description and enumerates every node
and relationship assignment; it shares no code with the evaluator.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from kgagent.store import Graph

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

LABELS = ["Person", "City", "Item"]
REL_TYPES = ["KNOWS", "IN", "LIKES"]
NAMES = ["ann", "bob", "cy", "dee"]


def random_properties(rng: random.Random) -> dict:
    props = {}
    if rng.random() < 0.8:
        props["name"] = rng.choice(NAMES)
    if rng.random() < 0.6:
        props["age"] = rng.randint(0, 5)
    if rng.random() < 0.3:
        props["score"] = rng.choice([0.5, 1.0, 2.25, -3.0])
    if rng.random() < 0.2:
        props["flag"] = rng.random() < 0.5
    if rng.random() < 0.1:
        props["tags"] = [rng.choice(NAMES) for _ in range(rng.randint(0, 2))]
    return props


def random_graph(rng: random.Random, max_nodes: int = 20, max_rels: int = 40) -> Graph:
    graph = Graph()
    n = rng.randint(1, max_nodes)
    for _ in range(n):
        graph.add_node(rng.choice(LABELS), random_properties(rng))
    for _ in range(rng.randint(0, max_rels)):
        props = {"w": rng.randint(0, 3)} if rng.random() < 0.4 else {}
        graph.add_relationship(rng.randrange(n), rng.randrange(n), rng.choice(REL_TYPES), props)
    return graph


def _lit(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return "'" + value + "'"
    return repr(value)


@dataclass
class NodeSpec:
    var: str
    label: str | None = None
    props: dict = field(default_factory=dict)


@dataclass
class HopSpec:
    direction: str  # out | in
    label: str | None = None


@dataclass
class ReadSpec:
    nodes: list[NodeSpec]  # len(hops) + 1; a repeated var closes a cycle
    hops: list[HopSpec]
    where: list[tuple] = field(default_factory=list)  # (var, key, op, literal), ANDed
    returns: list[tuple] = field(default_factory=list)  # (var, key) or ("COUNT", None)

    def text(self) -> str:
        out = []
        for i, node in enumerate(self.nodes):
            first_use = all(n.var != node.var for n in self.nodes[:i])
            body = node.var
            if first_use and node.label:
                body += ":" + node.label
            if first_use and node.props:
                body += " {" + ", ".join(f"{k}: {_lit(v)}" for k, v in node.props.items()) + "}"
            out.append(f"({body})")
            if i < len(self.hops):
                hop = self.hops[i]
                rel = f"[:{hop.label}]" if hop.label else ""
                out.append(f"-{rel}->" if hop.direction == "out" else f"<-{rel}-")
        text = "MATCH " + "".join(out)
        if self.where:
            text += " WHERE " + " AND ".join(f"{v}.{k} {op} {_lit(lit)}" for v, k, op, lit in self.where)
        items = ["COUNT(*)" if v == "COUNT" else f"{v}.{k}" for v, k in self.returns]
        return text + " RETURN " + ", ".join(items)


def random_read_spec(rng: random.Random) -> ReadSpec:
    hops = rng.randint(1, 2)
    names = ["a", "b", "c"]
    nodes = []
    for i in range(hops + 1):
        var = names[i]
        if i == 2 and rng.random() < 0.15:
            nodes.append(NodeSpec("a"))
            continue
        label = rng.choice(LABELS) if rng.random() < 0.6 else None
        props = {}
        if rng.random() < 0.25:
            props["name"] = rng.choice(NAMES)
        if rng.random() < 0.1:
            props["age"] = rng.randint(0, 5)
        nodes.append(NodeSpec(var, label, props))
    hop_specs = [HopSpec(rng.choice(["out", "in"]), rng.choice(REL_TYPES) if rng.random() < 0.6 else None)
                 for _ in range(hops)]
    vars_ = sorted({n.var for n in nodes})
    where = []
    for _ in range(rng.choice([0, 0, 1, 2])):
        key = rng.choice(["name", "age", "score"])
        op = rng.choice(["=", "<>", "<", ">", "<=", ">="])
        lit = rng.choice(NAMES) if key == "name" else rng.choice([0, 2, 3, 1.0, 0.5])
        where.append((rng.choice(vars_), key, op, lit))
    if rng.random() < 0.2:
        returns = [("COUNT", None)]
    else:
        returns = [(rng.choice(vars_), rng.choice(["name", "age", "score"])) for _ in range(rng.randint(1, 2))]
    return ReadSpec(nodes, hop_specs, where, returns)


_MISSING = object()


def _same(a, b) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    return False


def _ordered(a, b, op) -> bool:
    numeric = (isinstance(a, (int, float)) and not isinstance(a, bool)
               and isinstance(b, (int, float)) and not isinstance(b, bool))
    if not (numeric or (isinstance(a, str) and isinstance(b, str))):
        return False
    return {"<": a < b, ">": a > b, "<=": a <= b, ">=": a >= b}[op]


def _condition(value, op, lit) -> bool:
    if value is _MISSING:
        return False
    if op == "=":
        return _same(value, lit)
    if op == "<>":
        return not _same(value, lit)
    return _ordered(value, lit, op)


def oracle_rows(graph: Graph, spec: ReadSpec) -> list[tuple]:
    """Enumerate every assignment, filter, sort by (node ids, rel ids), project."""
    node_props = {n.id: (n.label, n.properties) for n in graph.nodes()}
    rels = {r.id: r for r in graph.relationships()}
    vars_ = list(dict.fromkeys(n.var for n in spec.nodes))
    matches = []
    for assignment in itertools.product(sorted(node_props), repeat=len(vars_)):
        env = dict(zip(vars_, assignment))
        ok = True
        for node in spec.nodes:
            label, props = node_props[env[node.var]]
            if node.label and label != node.label:
                ok = False
            if any(not _same(props.get(k, _MISSING), v) for k, v in node.props.items()):
                ok = False
        if not ok:
            continue
        for rel_ids in itertools.product(sorted(rels), repeat=len(spec.hops)):
            if len(set(rel_ids)) != len(rel_ids):
                continue
            good = True
            for i, hop in enumerate(spec.hops):
                rel = rels[rel_ids[i]]
                src, dst = env[spec.nodes[i].var], env[spec.nodes[i + 1].var]
                if hop.direction == "in":
                    src, dst = dst, src
                if rel.source != src or rel.target != dst or (hop.label and rel.label != hop.label):
                    good = False
                    break
            if not good:
                continue
            if all(_condition(node_props[env[v]][1].get(k, _MISSING), op, lit) for v, k, op, lit in spec.where):
                matches.append((tuple(env[n.var] for n in spec.nodes), rel_ids, env))
    matches.sort(key=lambda m: (m[0], m[1]))
    if spec.returns == [("COUNT", None)]:
        return [(len(matches),)]
    rows = []
    for _, _, env in matches:
        rows.append(tuple(node_props[env[v]][1].get(k) for v, k in spec.returns))
    return rows


def canonical_rows(rows) -> str:
    return json.dumps(rows, sort_keys=True)


def write_transcript(path: Path, entries: list[tuple]) -> Path:
    """Entries are ``(tag, response)`` or ``(tag, response, extra)``; indexes count per tag.

    A response that is not a string is JSON-encoded. ``extra`` may set
    ``index`` (for instance -1 for a fallback), ``fail_times`` or ``status``.
    """
    counters: dict[str, int] = {}
    lines = []
    for entry in entries:
        tag, response = entry[0], entry[1]
        extra = dict(entry[2]) if len(entry) > 2 else {}
        if "index" not in extra:
            extra["index"] = counters.get(tag, 0)
            counters[tag] = extra["index"] + 1
        text = response if isinstance(response, str) else json.dumps(response)
        lines.append(json.dumps({"tag": tag, "response": text, **extra}))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# -- fuzzed KGQL text for parser round-trips --------------------------------------------

_FUZZ_NAMES = ["n", "m", "x1", "_tmp", "Person", "City", "match", "where", "return", "count",
               "As", "with space", "back`tick", "ÜberLabel", "true_ish"]
_FUZZ_STRINGS = ["", "plain", "it's", 'say "hi"', "back\\slash", "tab\there", "line\nbreak",
                 "üñíçødé", "{braces}", "MATCH (n) RETURN n"]


def _ident(name: str) -> str:
    import re
    if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name) and name.upper() not in {
            "MATCH", "WHERE", "RETURN", "CREATE", "MERGE", "SET", "AS", "AND", "OR", "COUNT",
            "TRUE", "FALSE"}:
        return name
    return "`" + name.replace("`", "``") + "`"


def _fuzz_string(rng: random.Random) -> str:
    s = rng.choice(_FUZZ_STRINGS)
    quote = rng.choice(["'", '"'])
    body = s.replace("\\", "\\\\").replace(quote, "\\" + quote).replace("\n", "\\n").replace("\t", "\\t")
    return quote + body + quote


def _fuzz_literal(rng: random.Random, depth: int = 0) -> str:
    r = rng.random()
    if r < 0.3:
        return _fuzz_string(rng)
    if r < 0.5:
        return str(rng.randint(-50, 10**6))
    if r < 0.65:
        return rng.choice(["0.5", "-2.25", "1e3", "3.0", "1.5E-2"])
    if r < 0.8:
        return rng.choice(["true", "FALSE", "True"])
    if depth == 0:
        return "[" + ", ".join(_fuzz_literal(rng, 1) for _ in range(rng.randint(0, 3))) + "]"
    return str(rng.randint(0, 9))


def _fuzz_props(rng: random.Random, required: bool = False) -> str:
    if not required and rng.random() < 0.5:
        return ""
    keys = rng.sample(_FUZZ_NAMES, rng.randint(1, 3))
    return " {" + ", ".join(f"{_ident(k)}: {_fuzz_literal(rng)}" for k in keys) + "}"


def _fuzz_node(rng: random.Random, var: str | None, bound: bool, create: bool = False) -> str:
    if bound:
        return f"({_ident(var)})"
    body = _ident(var) if var else ""
    if create or rng.random() < 0.7:
        body += ":" + _ident(rng.choice(_FUZZ_NAMES))
    return "(" + body + _fuzz_props(rng) + ")"


def _fuzz_pattern(rng: random.Random, bound: set[str], fresh, create: bool) -> str:
    """``bound`` holds node variables only; relationship variables are never reused."""
    hops = rng.randint(0, 3)
    parts = []
    for i in range(hops + 1):
        if bound and rng.random() < 0.3:
            var = rng.choice(sorted(bound))
            parts.append(_fuzz_node(rng, var, True))
        else:
            var = fresh() if (create or rng.random() < 0.85) else None
            parts.append(_fuzz_node(rng, var, False, create))
            if var:
                bound.add(var)
        if i < hops:
            label = ":" + _ident(rng.choice(_FUZZ_NAMES)) if (create or rng.random() < 0.7) else ""
            rvar = ""
            if not create and rng.random() < 0.3:
                rvar = fresh()
            inner = f"[{_ident(rvar) if rvar else ''}{label}{_fuzz_props(rng) if not create else ''}]"
            if inner == "[]" and rng.random() < 0.5:
                inner = ""
            parts.append(f"-{inner}->" if rng.random() < 0.5 else f"<-{inner}-")
    return "".join(parts)


def _fuzz_where(rng: random.Random, bound: list[str], depth: int = 0) -> str:
    if depth < 2 and rng.random() < 0.35:
        op = rng.choice(["AND", "OR", "and", "or"])
        left = _fuzz_where(rng, bound, depth + 1)
        right = _fuzz_where(rng, bound, depth + 1)
        text = f"{left} {op} {right}"
        return f"({text})" if rng.random() < 0.5 else text
    var = rng.choice(bound)
    lhs = f"{_ident(var)}.{_ident(rng.choice(_FUZZ_NAMES))}"
    rhs = _fuzz_literal(rng) if rng.random() < 0.7 else f"{_ident(rng.choice(bound))}.{_ident(rng.choice(_FUZZ_NAMES))}"
    if rng.random() < 0.2:
        lhs, rhs = rhs, lhs
    return f"{lhs} {rng.choice(['=', '<>', '<', '>', '<=', '>='])} {rhs}"


def random_query_text(rng: random.Random) -> str:
    """A random syntactically valid KGQL statement list with odd spacing and casing."""
    counter = itertools.count()
    fresh = lambda: f"v{next(counter)}"  # noqa: E731
    bound: set[str] = set()
    statements = []
    write = rng.random() < 0.45
    for _ in range(rng.randint(1, 2) if not write else rng.randint(0, 1)):
        patterns = [_fuzz_pattern(rng, bound, fresh, False) for _ in range(rng.randint(1, 2))]
        text = rng.choice(["MATCH", "match", "Match"]) + " " + ", ".join(patterns)
        if bound and rng.random() < 0.5:
            text += " WHERE " + _fuzz_where(rng, sorted(bound))
        statements.append(text)
    if write:
        for _ in range(rng.randint(1, 2)):
            if rng.random() < 0.6:
                patterns = [_fuzz_pattern(rng, bound, fresh, True) for _ in range(rng.randint(1, 2))]
                statements.append("CREATE " + ", ".join(patterns))
            else:
                var = fresh()
                text = f"MERGE ({_ident(var)}:{_ident(rng.choice(_FUZZ_NAMES))}{_fuzz_props(rng, True)})"
                bound.add(var)
                if rng.random() < 0.5:
                    sets = [f"{_ident(var)}.{_ident(rng.choice(_FUZZ_NAMES))} = {_fuzz_literal(rng)}"
                            for _ in range(rng.randint(1, 2))]
                    text += " SET " + ", ".join(sets)
                statements.append(text)
    elif bound:
        items = []
        for _ in range(rng.randint(1, 3)):
            if rng.random() < 0.2:
                items.append(rng.choice(["COUNT(*)", f"count({_ident(rng.choice(sorted(bound)))})"]))
            else:
                items.append(f"{_ident(rng.choice(sorted(bound)))}.{_ident(rng.choice(_FUZZ_NAMES))}")
            if rng.random() < 0.3:
                items[-1] += f" AS {_ident(rng.choice(_FUZZ_NAMES))}"
        statements[-1] += " RETURN " + ", ".join(items)
    sep = rng.choice([";", " ;\n", ";  "])
    text = sep.join(statements)
    return text + (";" if rng.random() < 0.2 else "")


# -- random write batches ----------------------------------------------------------------

def random_write_list(rng: random.Random) -> str:
    label = lambda: rng.choice(["A", "B", "C"])  # noqa: E731
    key = lambda: rng.randint(0, 3)  # noqa: E731
    choice = rng.randrange(7)
    if choice == 0:
        return f"CREATE (x:{label()} {{k: {key()}, v: '{rng.choice(NAMES)}'}})"
    if choice == 1:
        return f"MERGE (x:{label()} {{k: {key()}}}) SET x.v = {rng.randint(0, 9)}"
    if choice == 2:
        return f"MATCH (a:{label()} {{k: {key()}}}) CREATE (a)-[:R]->(b:{label()} {{k: {key()}}})"
    if choice == 3:
        return (f"MATCH (a:{label()} {{k: {key()}}}), (b:{label()} {{k: {key()}}}) "
                f"CREATE (a)-[:S {{w: {key()}}}]->(b)")
    if choice == 4:
        return f"CREATE (x:{label()} {{k: {key()}}})-[:R]->(y:{label()} {{k: {key()}}})"
    if choice == 5:
        return f"MERGE (m:{label()} {{k: {key()}}}); CREATE (m)<-[:T]-(n:{label()} {{k: {key()}}})"
    # fails at run time: the literal overflows a signed 64-bit integer
    return f"CREATE (x:{label()} {{k: {key()}}}); MERGE (y:{label()} {{k: 99999999999999999999}})"


def random_write_batch(rng: random.Random) -> list[str]:
    return [random_write_list(rng) for _ in range(rng.randint(1, 8))]
