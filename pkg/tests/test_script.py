import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from helpers import GOLDEN, random_graph
from kgagent.script import (
    BudgetExceeded, ScriptError, ScriptSyntaxError, ScriptTimeout, eval_math, execute,
    format_program, format_result, parse_expression, parse_program, run_program,
)
from kgagent.script.interpreter import Interpreter
from kgagent.store import Graph, export_snapshot, import_snapshot

Q106 = ('let urls = nodes_by_label("URL"); let xs = sort_asc([42, 23, 2, 88, 37, 15]); '
        'let result = if(length(urls) > 0, index(xs, 2) + index(xs, 4), 0);')


def q106_graph() -> Graph:
    return import_snapshot((GOLDEN / "q106.json").read_text(encoding="utf-8"))


def run(text: str, graph: Graph | None = None):
    return run_program(parse_program(text), graph)


# -- examples ------------------------------------------------------------------------------

def test_q106_program_gives_65():
    assert run(Q106, q106_graph()) == 65
    assert format_result(run(Q106, q106_graph())) == "65"


def test_q106_program_on_empty_graph_takes_else_branch():
    assert run(Q106, Graph()) == 0


def test_minimal_program():
    assert run("let result = 1") == 1


def test_eval_math_examples():
    assert eval_math("23 + 42") == 65
    assert eval_math("0 * 12345") == 0
    assert eval_math("7 / 2") == 3.5 and eval_math("6 / 3") == 2
    assert eval_math("2 × 3 ÷ 4") == 1.5


def test_eval_math_rejects_graph_access():
    with pytest.raises(ScriptError, match="nodes_by_label"):
        eval_math('length(nodes_by_label("URL"))')


def test_graph_functions():
    g = q106_graph()
    text = ('let s = index(nodes_by_label("Script"), 0); '
            'let ins = neighbors(s, "uses", "in"); '
            'let result = [label_of(index(ins, 0)), length(neighbors(s, null, "both")), edge_count()]')
    label, degree, edges = run(text, g)
    assert label == "Function" and degree >= 1 and edges == 4


def test_higher_order_functions():
    text = ("let xs = range(1, 6); let sq = map(xs, x => x * x); "
            "let result = [sum(filter(sq, x => mod(x, 2) == 1)), max(sq), min(3, 1, 2), join(sq, \",\")]")
    assert run(text) == [35, 25, 1, "1,4,9,16,25"]


def test_sort_with_key_and_desc():
    text = 'let xs = ["bb", "a", "ccc"]; let result = [sort_asc(xs, s => length(s)), sort_desc(xs)]'
    assert run(text) == [["a", "bb", "ccc"], ["ccc", "bb", "a"]]


@given(st.lists(st.integers(-10**6, 10**6), max_size=30))
@settings(max_examples=200, deadline=None)
def test_sort_matches_brute_force(xs):
    got = run(f"let result = sort_asc({xs})")
    # brute-force oracle: a permutation with every adjacent pair ordered
    assert sorted(got) == sorted(xs) and all(a <= b for a, b in zip(got, got[1:]))
    assert run(f"let result = sort_desc({xs})") == got[::-1]


# -- random arithmetic against an exact reference -----------------------------------------

def _arith(rng: random.Random, depth: int) -> tuple[str, Fraction]:
    if depth == 0 or rng.random() < 0.3:
        n = rng.randint(-50, 50)
        return str(n), Fraction(n)
    op = rng.choice("+-*/")
    left, lv = _arith(rng, depth - 1)
    if op == "/":
        d = rng.choice([i for i in range(-9, 10) if i])
        return f"({left} / {d})", lv / d
    right, rv = _arith(rng, depth - 1)
    value = {"+": lv + rv, "-": lv - rv, "*": lv * rv}[op]
    return f"({left} {op} {right})", value


@given(st.integers(0, 2**32))
@settings(max_examples=1000, deadline=None)
def test_random_arithmetic_matches_exact_reference(seed):
    text, exact = _arith(random.Random(seed), 4)
    got = eval_math(text)
    if exact.denominator == 1 and isinstance(got, int):
        assert got == exact
    else:
        assert got == pytest.approx(float(exact), rel=1e-9, abs=1e-9)


# -- traps ---------------------------------------------------------------------------------

@pytest.mark.parametrize("text, fragment", [
    ("let result = 1 / 0", "division by zero"),
    ("let result = mod(3, 0)", "division by zero"),
    ("let result = 9223372036854775807 + 1", "overflow"),
    ("let result = pow(10.0, 400)", "non-finite"),
    ('let result = 1 + "a"', "expects a number"),
    ("let result = index([1, 2], 5)", "out of range"),
    ("let result = sum([])  + frob(1)", "unknown function"),
    ("let result = if(1, 2, 3)", "boolean"),
    ('let result = sort_asc([1, "a"])', "all numbers"),
    ("let result = max([])", "empty list"),
    ('let result = to_number("abc")', "cannot convert"),
    ("let result = x => x", "plain value"),
])
def test_runtime_traps(text, fragment):
    with pytest.raises(ScriptError) as info:
        run(text)
    assert fragment in str(info.value)


def test_trap_reports_failing_step():
    with pytest.raises(ScriptError) as info:
        run("let a = 1; let b = a / 0; let result = b")
    assert info.value.step == 1 and str(info.value).startswith("step 1:")


def test_graph_accessor_without_graph_traps():
    with pytest.raises(ScriptError, match="needs a graph"):
        run('let result = nodes_by_label("URL")')


def test_missing_property_traps():
    g = Graph()
    g.add_node("A", {"x": 1})
    with pytest.raises(ScriptError, match="no property"):
        run('let result = property_of(index(nodes_by_label("A"), 0), "y")', g)


@pytest.mark.parametrize("text, fragment", [
    ("let a = 1", "must bind 'result'"),
    ("", "empty program"),
    ("let result = y", "not bound"),
    ("let result = (1 + ", "expected an expression"),
    ("let result = 'open", "1:"),
    ("let result = " + "(" * 200 + "1" + ")" * 200, "nested deeper"),
])
def test_syntax_errors(text, fragment):
    with pytest.raises(ScriptSyntaxError) as info:
        parse_program(text)
    assert fragment in str(info.value)


def test_later_steps_can_shadow_and_chain():
    assert run("let a = 1; let a = a + 1; let result = a * 10") == 20


# -- budget and time -----------------------------------------------------------------------

def test_budget_exhaustion():
    with pytest.raises(BudgetExceeded):
        run("let result = sum(range(1000000))")
    assert execute(parse_program("let result = 1 + 2"), None).steps == 3


def test_small_budget_is_enforced():
    with pytest.raises(BudgetExceeded):
        run_program(parse_program("let result = sum(range(50))"), None, budget=20)


def test_timeout_uses_clock():
    ticks = itertools.count(0.0, 1.0)
    interp = Interpreter(None, budget=10**9, timeout=5.0, clock=lambda: next(ticks))
    with pytest.raises(ScriptTimeout):
        interp.run(parse_program("let result = sum(map(range(100), x => x))"))


# -- printing, purity, determinism -------------------------------------------------------

def test_round_trip_of_q106():
    prog = parse_program(Q106)
    assert parse_program(format_program(prog)) == prog


@given(st.integers(0, 2**32))
@settings(max_examples=300, deadline=None)
def test_arithmetic_round_trip(seed):
    text, _ = _arith(random.Random(seed), 5)
    expr = parse_expression(text)
    prog = parse_program(f"let result = {text}")
    assert parse_program(format_program(prog)) == prog
    assert parse_expression(format_program(prog).split("= ", 1)[1]) == expr


def test_string_literals_round_trip():
    prog = parse_program('let result = concat("a\\"b", "\\n", "tab\\t", \'single\')')
    assert parse_program(format_program(prog)) == prog
    assert run_program(prog, None) == 'a"b\ntab\tsingle'


def test_scripts_never_mutate_the_graph():
    g = random_graph(random.Random(3))
    before = export_snapshot(g)
    text = ('let ps = nodes_by_label("Person"); '
            'let result = map(ps, p => length(neighbors(p, null, "both")))')
    run(text, g)
    assert export_snapshot(g) == before


def test_runs_are_deterministic():
    g = q106_graph()
    assert len({repr(run(Q106, g)) for _ in range(10)}) == 1
