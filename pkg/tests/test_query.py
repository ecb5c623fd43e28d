import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import (
    canonical_rows, oracle_rows, random_graph, random_query_text, random_read_spec, random_write_batch,
)
from kgagent.query import (
    ParseError, QueryError, dependency_chains, execute_chains, execute_read, execute_write,
    format_query, parse, partition_independent, repair_text, tokenize,
)
from kgagent.query.ast import Count, MatchStatement, PropertyRef
from kgagent.query.repair import decode_escapes, strip_fences
from kgagent.store import Graph, export_snapshot
from test_store import q59_graph

Q59 = "MATCH (w:Writer)-[:QUOTED_FOR]->(wod:WordOfTheDay {date: '[date1]'}) RETURN w.name AS writer_name"


# -- lexer ---------------------------------------------------------------------------

def test_tokens_reconstruct_input():
    text = "MATCH (a:`odd name` {x: 'it\\'s', y: -2.5e3})\n  -[:R]->(b) WHERE a.x <> b.y RETURN COUNT(*) ;"
    tokens = tokenize(text)
    pos = 0
    for tok in tokens[:-1]:
        assert tok.offset >= pos and text[pos:tok.offset].strip() == ""
        assert text[tok.offset:tok.offset + len(tok.text)] == tok.text
        pos = tok.offset + len(tok.text)
    assert text[pos:].strip() == "" and tokens[-1].kind == "eof"


@given(st.integers(0, 2**32))
@settings(max_examples=100, deadline=None)
def test_token_offsets_increase_on_fuzzed_text(seed):
    text = random_query_text(random.Random(seed))
    offsets = [t.offset for t in tokenize(text)[:-1]]
    assert offsets == sorted(set(offsets))


# -- parser ----------------------------------------------------------------------------

def test_parse_q59_shape():
    q = parse(Q59)
    (stmt,) = q.statements
    assert isinstance(stmt, MatchStatement)
    (pattern,) = stmt.patterns
    assert len(pattern.nodes) == 2 and len(pattern.rels) == 1
    assert pattern.nodes[1].properties == (("date", "[date1]"),)
    (item,) = stmt.returns
    assert item.expr == PropertyRef("w", "name") and item.alias == "writer_name"


def test_parse_count_wildcard():
    q = parse("MATCH (n) RETURN COUNT(n)")
    stmt = q.statements[0]
    assert stmt.patterns[0].nodes[0].label is None
    assert stmt.returns[0].expr == Count("n")


def test_canonical_print():
    assert format_query(parse("match  (w:Writer)-[:QUOTED_FOR]->(wod:WordOfTheDay {date:'[date1]'})"
                              "  return w.name as writer_name")) == Q59


def test_keyword_names_are_backticked_when_printed():
    q = parse("MATCH (n:`match` {`return`: 1}) RETURN n.`count`")
    text = format_query(q)
    assert "`match`" in text and "`return`" in text and "`count`" in text
    assert parse(text) == q


@pytest.mark.parametrize("text, where", [
    ("MATCH (n RETURN n.x", "1:10"),
    ("MATCH (n) RETURN m.x", "1:18"),
    ("CREATE (a)-[:R]->(b:B)", "1:9"),
    ("MATCH (a)-->(b)-->(c)-->(d)-->(e) RETURN a.x", "hops"),
    ("MATCH (n) WHERE n.x = 'open RETURN n.x", "unterminated"),
    ("MERGE (n:L)", "MERGE"),
    ("", "1:1"),
])
def test_parse_errors_have_location(text, where):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert where in str(info.value)


def test_parse_error_lists_expected_tokens():
    with pytest.raises(ParseError) as info:
        parse("MATCH (n) RETURN")
    err = info.value
    assert err.expected and err.line == 1 and err.column == 17


@given(st.integers(0, 2**32))
@settings(max_examples=300, deadline=None)
def test_round_trip_on_fuzzed_queries(seed):
    q = parse(random_query_text(random.Random(seed)))
    printed = format_query(q)
    assert parse(printed) == q
    assert format_query(parse(printed)) == printed


@given(st.text(alphabet="MATCHRETURN()[]{}-><:;=', .abc123`\"\\*\n", max_size=60))
@settings(max_examples=300, deadline=None)
def test_garbage_only_raises_parse_error(text):
    try:
        parse(text)
    except ParseError:
        pass


def test_deep_nesting_in_where_is_rejected_cleanly():
    text = "MATCH (n) WHERE " + "(" * 500 + "n.x = 1" + ")" * 500 + " RETURN n.x"
    with pytest.raises(ParseError, match="nest"):
        parse(text)
    ok = "MATCH (n) WHERE " + "(" * 32 + "n.x = 1" + ")" * 32 + " RETURN n.x"
    assert format_query(parse(ok)) == "MATCH (n) WHERE n.x = 1 RETURN n.x"


# -- reads -------------------------------------------------------------------------------

def test_q59_read_returns_writer():
    table = execute_read(parse(Q59), q59_graph())
    assert table.columns == ["writer_name"] and table.rows == [("[firstname lastname]",)]
    assert table.to_text() == "[firstname lastname]"


def test_empty_graph_gives_empty_table():
    table = execute_read(parse("MATCH (n)-[:R]->(m) RETURN n.x"), Graph())
    assert table.rows == [] and table.is_empty()


def test_count_on_empty_graph_is_zero_row():
    assert execute_read(parse("MATCH (n) RETURN COUNT(*)"), Graph()).rows == [(0,)]


def test_count_groups_by_other_items():
    g = Graph()
    for city in ["a", "b", "a"]:
        g.add_node("P", {"city": city})
    table = execute_read(parse("MATCH (p:P) RETURN p.city, COUNT(p) AS n"), g)
    assert table.rows == [("a", 2), ("b", 1)]


def test_missing_property_is_non_match_and_null_projection():
    g = Graph()
    g.add_node("P", {"x": 1})
    g.add_node("P", {})
    assert execute_read(parse("MATCH (p:P) WHERE p.x <> 5 RETURN p.x"), g).rows == [(1,)]
    assert execute_read(parse("MATCH (p:P) RETURN p.x"), g).rows == [(1,), (None,)]


def test_cross_kind_comparisons_never_match():
    g = Graph()
    g.add_node("P", {"x": "1"})
    g.add_node("P", {"x": True})
    for cond in ("p.x = 1", "p.x < 2", "p.x >= 0"):
        assert execute_read(parse(f"MATCH (p:P) WHERE {cond} RETURN p.x"), g).rows == []


def test_numbers_compare_across_int_and_float():
    g = Graph()
    g.add_node("P", {"x": 2})
    assert execute_read(parse("MATCH (p:P) WHERE p.x = 2.0 AND p.x < 2.5 RETURN p.x"), g).rows == [(2,)]


def test_or_and_precedence():
    g = Graph()
    for x in range(4):
        g.add_node("P", {"x": x})
    rows = execute_read(parse("MATCH (p:P) WHERE p.x = 0 OR p.x > 1 AND p.x < 3 RETURN p.x"), g).rows
    assert rows == [(0,), (2,)]


def test_statements_share_bindings():
    g = q59_graph()
    q = parse("MATCH (w:Writer); MATCH (w)-[:QUOTED_IN]->(q:Quote) RETURN q.source")
    assert execute_read(q, g).rows == [("[newspaper name]",)]


def test_read_never_mutates():
    g = random_graph(random.Random(9))
    before = export_snapshot(g)
    execute_read(parse("MATCH (a)-->(b) RETURN a.name, COUNT(*)"), g)
    assert export_snapshot(g) == before


def test_read_rejects_write_lists():
    with pytest.raises(QueryError):
        execute_read(parse("CREATE (n:A {x: 1})"), Graph())


def test_multi_column_text():
    g = q59_graph()
    table = execute_read(parse("MATCH (w:Writer)-[:QUOTED_IN]->(q) RETURN w.name, q.date AS d"), g)
    assert table.to_text() == "w.name: [firstname lastname], d: [date2]"


@given(st.integers(0, 2**32))
@settings(max_examples=200, deadline=None)
def test_random_reads_match_brute_force(seed):
    rng = random.Random(seed)
    graph = random_graph(rng)
    spec = random_read_spec(rng)
    got = execute_read(parse(spec.text()), graph).rows
    assert canonical_rows(got) == canonical_rows(oracle_rows(graph, spec))


# -- writes -----------------------------------------------------------------------------

def test_create_q59_pair():
    g = Graph()
    s = execute_write(parse("CREATE (w:Writer {name: 'X'})-[:QUOTED_FOR]->(d:WordOfTheDay {date: 'd1'})"), g)
    assert (s.nodes_created, s.relationships_created) == (2, 1)


def test_merge_existing_key():
    g = Graph()
    execute_write(parse("MERGE (n:Quote {text: 'q'})"), g)
    s = execute_write(parse("MERGE (n:Quote {text: 'q'}) SET n.date = 'd'"), g)
    assert (s.nodes_created, s.nodes_merged) == (0, 1)
    assert g.node(0).properties == {"text": "q", "date": "d"}


def test_match_bound_create_runs_per_row():
    g = Graph()
    for i in range(3):
        g.add_node("A", {"i": i})
    s = execute_write(parse("MATCH (a:A) CREATE (a)-[:HAS]->(t:Tag {name: 'x'})"), g)
    assert (s.nodes_created, s.relationships_created) == (3, 3)


def test_empty_label_edge_via_bare_arrow():
    g = Graph()
    execute_write(parse("CREATE (a:A {x: 1})-->(b:B {x: 2})"), g)
    assert g.relationships()[0].label == ""


def test_failed_list_rolls_back():
    g = q59_graph()
    before = export_snapshot(g)
    with pytest.raises(QueryError):
        execute_write(parse("CREATE (a:A {x: 1}); MERGE (b:B {x: 99999999999999999999})"), g)
    assert export_snapshot(g) == before


def test_return_rejected_in_write_lists():
    with pytest.raises(QueryError):
        execute_write(parse("CREATE (b:B {x: 1}); MATCH (a:A) RETURN a.x"), Graph())
    with pytest.raises(ParseError, match="RETURN must end"):
        parse("MATCH (a:A) RETURN a.x; CREATE (b:B {x: 1})")


@given(st.integers(0, 2**32))
@settings(max_examples=100, deadline=None)
def test_merge_only_batches_are_idempotent(seed):
    rng = random.Random(seed)
    texts = [f"MERGE (n:{rng.choice('AB')} {{k: {rng.randint(0, 3)}}}) SET n.v = {rng.randint(0, 2)}"
             for _ in range(rng.randint(1, 6))]
    g = Graph()
    for t in texts:
        execute_write(parse(t), g)
    once = export_snapshot(g)
    for t in texts:
        execute_write(parse(t), g)
    assert export_snapshot(g) == once


# -- repair -------------------------------------------------------------------------------

def test_fences_removed():
    body = "MATCH (n) RETURN n.x"
    assert repair_text(f"```cypher\n{body}\n```") == body
    assert strip_fences(f"```\n{body}\n```") == body


def test_escaped_quotes_decoded():
    raw = 'MATCH (n {name: \\"X\\"}) RETURN n.name'
    with pytest.raises(ParseError):
        parse(raw)
    fixed = repair_text(raw)
    assert parse(fixed).statements[0].patterns[0].nodes[0].properties == (("name", "X"),)


def test_escaped_newlines_and_unicode_decoded():
    raw = "MATCH (n:P)\\nWHERE n.city = 'Z\\u00fcrich'\\nRETURN n.x"
    fixed = repair_text(raw)
    assert "\n" in fixed and "Zürich" in fixed
    parse(fixed)


def test_escapes_inside_literals_alone_are_kept():
    text = "MATCH (n) WHERE n.t = 'a\\nb' RETURN n.t"
    assert repair_text(text) == text
    assert decode_escapes("a\\tb") == "a\tb"


@pytest.mark.parametrize("raw, fixed", [
    ("MATCH (n) WHERE n.x = 'abc RETURN n.x", None),
    ("MATCH (n:P {name: 'x'}) RETURN n.name", "MATCH (n:P {name: 'x'}) RETURN n.name"),
    ("CREATE (n:P {name: 'x'}", "CREATE (n:P {name: 'x'})"),
    ("CREATE (n:P {name: 'x})", None),
])
def test_balance_one_missing_closer(raw, fixed):
    out = repair_text(raw)
    if fixed is not None:
        assert out == fixed
        parse(out)


@given(st.integers(0, 2**32))
@settings(max_examples=200, deadline=None)
def test_repair_fixpoint_on_valid_queries(seed):
    text = format_query(parse(random_query_text(random.Random(seed))))
    assert repair_text(text) == text


# -- partitioning ----------------------------------------------------------------------

def test_disjoint_labels_give_two_chains():
    lists = [parse("CREATE (a:Alpha {k: 1})"), parse("CREATE (b:Beta {k: 1})")]
    assert dependency_chains(lists) == [[0], [1]]
    assert len(partition_independent(lists)) == 2


def test_node_then_edge_from_it_is_one_chain():
    lists = [parse("CREATE (x:Person {name: 'X'})"),
             parse("MATCH (x:Person {name: 'X'}) CREATE (x)-[:KNOWS]->(y:Person {name: 'Y'})")]
    chains = partition_independent(lists)
    assert chains == [lists]


def test_partition_is_a_partition():
    rng = random.Random(4)
    for _ in range(50):
        lists = [parse(t) for t in random_write_batch(rng)]
        chains = dependency_chains(lists)
        flat = sorted(i for c in chains for i in c)
        assert flat == list(range(len(lists)))
        assert all(c == sorted(c) for c in chains)


def test_partition_rejects_reads():
    with pytest.raises(ValueError):
        partition_independent([parse("MATCH (n) RETURN n.x")])


@given(st.integers(0, 2**32))
@settings(max_examples=100, deadline=None)
def test_chains_equal_sequential(seed):
    rng = random.Random(seed)
    base = Graph()
    for _ in range(rng.randint(0, 5)):
        base.merge_node(rng.choice("ABC"), {"k": rng.randint(0, 3)})
    lists = [parse(t) for t in random_write_batch(rng)]
    seq = base.copy()
    expected = []
    for q in lists:
        try:
            expected.append(execute_write(q, seq).as_dict())
        except QueryError:
            expected.append(None)
    par = base.copy()
    outcomes = execute_chains(par, lists, max_workers=4)
    assert export_snapshot(par) == export_snapshot(seq)
    assert [None if isinstance(o, QueryError) else o.as_dict() for o in outcomes] == expected
