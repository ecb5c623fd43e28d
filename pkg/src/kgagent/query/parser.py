"""Recursive-descent parser for KGQL.

Grammar (informal EBNF)::

    query      := statement (";"? statement)* ";"?
    statement  := match | create | merge
    match      := MATCH pattern ("," pattern)* [WHERE expr] [RETURN item ("," item)*]
    create     := CREATE pattern ("," pattern)*
    merge      := MERGE node [SET setitem ("," setitem)*]
    pattern    := node (rel node){0,3}
    node       := "(" [name] [":" name] [map] ")"
    rel        := "-" "[" [name] [":" name] [map] "]" "->"  |  "<-" "[" ... "]" "-"
                | "-" "-" ">"  |  "<" "-" "-"
    map        := "{" [name ":" literal ("," name ":" literal)*] "}"
    expr       := conj (OR conj)*
    conj       := atom (AND atom)*
    atom       := "(" expr ")" | operand cmp operand
    operand    := name "." name | literal
    cmp        := "=" | "<>" | "<" | ">" | "<=" | ">="
    item       := COUNT "(" (name | "*") ")" [AS name] | name "." name [AS name]
    setitem    := name "." name "=" literal
    literal    := string | ["-"] number | true | false | "[" [literal ("," literal)*] "]"

Variables are scoped to the whole statement list, which is how a MATCH binds
endpoints for a following CREATE.
"""

from __future__ import annotations

from kgagent.query.ast import (
    BoolOp, Comparison, Count, CreateStatement, Literal, MatchStatement, MergeStatement,
    NodePattern, Pattern, PropertyRef, Query, RelPattern, ReturnItem, SetItem,
)
from kgagent.query.lexer import ParseError, Token, tokenize

MAX_HOPS = 3
MAX_NESTING = 32  # parenthesised WHERE groups
_COMPARATORS = frozenset({"=", "<>", "<", ">", "<=", ">="})


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0
        self.scope: dict[str, str] = {}  # variable -> "node" | "rel"
        self.depth = 0

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def error(self, expected: set[str], token: Token | None = None) -> ParseError:
        token = token or self.tok
        return ParseError("syntax error", self.text, token.offset, expected, token.text)

    def fail(self, message: str, token: Token | None = None) -> ParseError:
        token = token or self.tok
        return ParseError(message, self.text, token.offset, found=token.text)

    def at_punct(self, *texts: str) -> bool:
        return self.tok.kind == "punct" and self.tok.text in texts

    def at_keyword(self, *words: str) -> bool:
        return self.tok.kind == "keyword" and self.tok.value in words

    def expect_punct(self, text: str) -> Token:
        if not self.at_punct(text):
            raise self.error({repr(text)})
        return self.advance()

    def expect_keyword(self, word: str) -> Token:
        if not self.at_keyword(word):
            raise self.error({word})
        return self.advance()

    def advance(self) -> Token:
        tok = self.tok
        self.pos += 1
        return tok

    def name(self, what: str = "identifier", allow_keywords: bool = False) -> str:
        tok = self.tok
        if tok.kind == "identifier" or (allow_keywords and tok.kind in ("keyword", "boolean")):
            self.advance()
            return tok.value if tok.kind == "identifier" else tok.text
        raise self.error({what})

    # -- grammar ---------------------------------------------------------------

    def query(self) -> Query:
        statements = []
        while True:
            if self.tok.kind == "eof":
                break
            if statements and self.at_punct(";"):
                self.advance()
                continue
            if statements and statements[-1].__class__ is MatchStatement and statements[-1].returns is not None:
                raise self.fail("RETURN must end the statement list")
            statements.append(self.statement())
        if not statements:
            raise self.error({"MATCH", "CREATE", "MERGE"})
        return Query(tuple(statements))

    def statement(self):
        if self.at_keyword("MATCH"):
            return self.match()
        if self.at_keyword("CREATE"):
            return self.create()
        if self.at_keyword("MERGE"):
            return self.merge()
        raise self.error({"MATCH", "CREATE", "MERGE"})

    def match(self) -> MatchStatement:
        self.advance()
        patterns = [self.pattern("match")]
        while self.at_punct(","):
            self.advance()
            patterns.append(self.pattern("match"))
        where = None
        if self.at_keyword("WHERE"):
            self.advance()
            where = self.expr()
        returns = None
        if self.at_keyword("RETURN"):
            self.advance()
            returns = [self.return_item()]
            while self.at_punct(","):
                self.advance()
                returns.append(self.return_item())
            returns = tuple(returns)
        return MatchStatement(tuple(patterns), where, returns)

    def create(self) -> CreateStatement:
        self.advance()
        patterns = [self.pattern("create")]
        while self.at_punct(","):
            self.advance()
            patterns.append(self.pattern("create"))
        return CreateStatement(tuple(patterns))

    def merge(self) -> MergeStatement:
        self.advance()
        tok = self.tok
        node = self.node_pattern("merge")
        if node.label is None or not node.properties:
            raise self.fail("MERGE needs a label and at least one property", tok)
        items = []
        if self.at_keyword("SET"):
            self.advance()
            while True:
                var_tok = self.tok
                var = self.name()
                if var != node.variable:
                    raise self.fail("SET may only target the merged variable", var_tok)
                self.expect_punct(".")
                key = self.name("property name", allow_keywords=True)
                self.expect_punct("=")
                items.append(SetItem(var, key, Literal(self.literal())))
                if not self.at_punct(","):
                    break
                self.advance()
        return MergeStatement(node, tuple(items))

    def pattern(self, mode: str) -> Pattern:
        nodes = [self.node_pattern(mode)]
        rels = []
        while self.at_punct("-", "<"):
            if len(rels) == MAX_HOPS:
                raise self.fail(f"patterns are limited to {MAX_HOPS} hops")
            rels.append(self.rel_pattern(mode))
            nodes.append(self.node_pattern(mode))
        return Pattern(tuple(nodes), tuple(rels))

    def _element_body(self, closer: str):
        var = label = None
        props: tuple = ()
        var_tok = self.tok
        if self.tok.kind == "identifier":
            var = self.name()
        if self.at_punct(":"):
            self.advance()
            label = self.name("label", allow_keywords=True)
        if self.at_punct("{"):
            props = self.prop_map()
        if not self.at_punct(closer):
            expected = {repr(closer)}
            if label is None:
                expected.add("':'")
            if not props:
                expected.add("'{'")
            raise self.error(expected)
        self.advance()
        return var, var_tok, label, props

    def node_pattern(self, mode: str) -> NodePattern:
        self.expect_punct("(")
        var, var_tok, label, props = self._element_body(")")
        if var is not None:
            kind = self.scope.get(var)
            if kind == "rel":
                raise self.fail(f"variable {var!r} is bound to a relationship", var_tok)
            if mode == "create" and kind == "node" and (label is not None or props):
                raise self.fail(f"variable {var!r} is already bound", var_tok)
            if mode == "merge" and kind is not None:
                raise self.fail(f"variable {var!r} is already bound", var_tok)
            if mode == "create" and kind is None and label is None:
                raise self.fail(f"new node {var!r} needs a label", var_tok)
            self.scope[var] = "node"
        elif mode == "create" and label is None:
            raise self.fail("new node needs a label", var_tok)
        return NodePattern(var, label, props)

    def rel_pattern(self, mode: str) -> RelPattern:
        if self.at_punct("<"):
            self.advance()
            self.expect_punct("-")
            direction = "in"
        else:
            self.expect_punct("-")
            direction = "out"
        var = label = None
        props: tuple = ()
        var_tok = self.tok
        if self.at_punct("["):
            self.advance()
            var, var_tok, label, props = self._element_body("]")
        self.expect_punct("-")
        if direction == "out":
            self.expect_punct(">")
        elif self.at_punct(">"):
            raise self.fail("relationships must have exactly one direction")
        if var is not None:
            kind = self.scope.get(var)
            if kind == "node":
                raise self.fail(f"variable {var!r} is bound to a node", var_tok)
            if mode == "create" and kind is not None:
                raise self.fail(f"variable {var!r} is already bound", var_tok)
            self.scope[var] = "rel"
        return RelPattern(direction, var, label, props)

    def prop_map(self) -> tuple:
        self.expect_punct("{")
        items = []
        seen = set()
        if not self.at_punct("}"):
            while True:
                key_tok = self.tok
                key = self.name("property name", allow_keywords=True)
                if key in seen:
                    raise self.fail(f"duplicate property {key!r}", key_tok)
                seen.add(key)
                self.expect_punct(":")
                items.append((key, self.literal()))
                if not self.at_punct(","):
                    break
                self.advance()
        self.expect_punct("}")
        return tuple(items)

    def literal(self, nested: bool = False):
        tok = self.tok
        if tok.kind in ("string", "boolean", "number"):
            self.advance()
            return tok.value
        if self.at_punct("-") and self.peek().kind == "number":
            self.advance()
            return -self.advance().value
        if self.at_punct("[") and not nested:
            self.advance()
            values = []
            if not self.at_punct("]"):
                while True:
                    values.append(self.literal(nested=True))
                    if not self.at_punct(","):
                        break
                    self.advance()
            self.expect_punct("]")
            return tuple(values)
        raise self.error({"literal"})

    def expr(self):
        operands = [self.conj()]
        while self.at_keyword("OR"):
            self.advance()
            operands.append(self.conj())
        return operands[0] if len(operands) == 1 else BoolOp("OR", tuple(operands))

    def conj(self):
        operands = [self.atom()]
        while self.at_keyword("AND"):
            self.advance()
            operands.append(self.atom())
        return operands[0] if len(operands) == 1 else BoolOp("AND", tuple(operands))

    def atom(self):
        if self.at_punct("("):
            if self.depth == MAX_NESTING:
                raise self.fail(f"conditions nest deeper than {MAX_NESTING} levels")
            self.advance()
            self.depth += 1
            inner = self.expr()
            self.depth -= 1
            self.expect_punct(")")
            return inner
        left = self.operand()
        if not (self.tok.kind == "punct" and self.tok.text in _COMPARATORS):
            raise self.error(set(_COMPARATORS))
        op = self.advance().text
        return Comparison(op, left, self.operand())

    def bound(self, name_tok: Token, name: str) -> None:
        if name not in self.scope:
            raise self.fail(f"variable {name!r} is not bound", name_tok)

    def operand(self):
        if self.tok.kind == "identifier":
            name_tok = self.tok
            var = self.name()
            self.bound(name_tok, var)
            self.expect_punct(".")
            return PropertyRef(var, self.name("property name", allow_keywords=True))
        return Literal(self.literal())

    def return_item(self) -> ReturnItem:
        if self.at_keyword("COUNT"):
            self.advance()
            self.expect_punct("(")
            if self.at_punct("*"):
                self.advance()
                expr = Count(None)
            else:
                name_tok = self.tok
                var = self.name()
                self.bound(name_tok, var)
                expr = Count(var)
            self.expect_punct(")")
        elif self.tok.kind == "identifier":
            name_tok = self.tok
            var = self.name()
            self.bound(name_tok, var)
            self.expect_punct(".")
            expr = PropertyRef(var, self.name("property name", allow_keywords=True))
        else:
            raise self.error({"COUNT", "identifier"})
        alias = None
        if self.at_keyword("AS"):
            self.advance()
            alias = self.name("alias", allow_keywords=True)
        return ReturnItem(expr, alias)


def parse(text: str) -> Query:
    """Parse KGQL text into a Query, raising ParseError on bad input."""
    return _Parser(text).query()
