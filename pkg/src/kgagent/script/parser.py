"""Parser and printer for graph scripts.

Program text is a sequence of ``let`` steps separated by ``;``::

    program  := step (";" step)* [";"]
    step     := "let" NAME "=" expr
    expr     := NAME "=>" expr | or
    or       := and ("or" and)*
    and      := not ("and" not)*
    not      := "not" not | cmp
    cmp      := add [("==" | "!=" | "<" | ">" | "<=" | ">=") add]
    add      := mul (("+" | "-") mul)*
    mul      := unary (("*" | "/" | "×" | "÷") unary)*
    unary    := "-" unary | primary
    primary  := NUMBER | STRING | "true" | "false" | "null"
              | "[" [expr ("," expr)*] "]" | NAME "(" [expr ("," expr)*] ")"
              | NAME | "(" expr ")"

The last step must bind ``result``. ``#`` starts a comment running to the end
of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Union

MAX_NESTING = 40   # parenthesis/call nesting while parsing
MAX_DEPTH = 150    # depth of the finished expression tree
KEYWORDS = frozenset({"let", "and", "or", "not", "true", "false", "null"})


class ScriptSyntaxError(Exception):
    def __init__(self, message: str, text: str, offset: int):
        self.message = message
        self.offset = offset
        self.line = text.count("\n", 0, offset) + 1
        self.column = offset - (text.rfind("\n", 0, offset) + 1) + 1
        super().__init__(f"{self.line}:{self.column} {message}")


@dataclass(frozen=True)
class Lit:
    value: Any


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class ListExpr:
    items: tuple


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Any
    right: Any


@dataclass(frozen=True)
class Not:
    operand: Any


@dataclass(frozen=True)
class Neg:
    operand: Any


@dataclass(frozen=True)
class Lambda:
    param: str
    body: Any


Expr = Union[Lit, Var, ListExpr, Call, BinOp, Not, Neg, Lambda]


@dataclass(frozen=True)
class Let:
    name: str
    expr: Expr


@dataclass(frozen=True)
class Program:
    steps: tuple[Let, ...]


_TOKEN = re.compile(r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<string>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>=>|==|!=|<=|>=|[-+*/×÷<>=(),;\[\]])
""", re.X)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"', "'": "'", "0": "\0"}


def _unquote(raw: str, text: str, offset: int) -> str:
    out, i, body = [], 0, raw[1:-1]
    while i < len(body):
        ch = body[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        esc = body[i + 1]
        if esc in _ESCAPES:
            out.append(_ESCAPES[esc])
            i += 2
        elif esc == "u" and re.fullmatch(r"[0-9a-fA-F]{4}", body[i + 2:i + 6]):
            out.append(chr(int(body[i + 2:i + 6], 16)))
            i += 6
        else:
            raise ScriptSyntaxError(f"invalid escape \\{esc}", text, offset + i + 1)
    return "".join(out)


def _tokenize(text: str) -> list[tuple[str, Any, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ScriptSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        raw = m.group()
        if kind == "number":
            tokens.append(("number", float(raw) if any(c in raw for c in ".eE") else int(raw), pos))
        elif kind == "string":
            tokens.append(("string", _unquote(raw, text, pos), pos))
        elif kind == "name":
            tokens.append(("kw" if raw in KEYWORDS else "name", raw, pos))
        elif kind == "op":
            tokens.append(("op", raw, pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.depth = 0

    def peek(self, k: int = 0):
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def at(self, kind: str, value: Any = None) -> bool:
        tok = self.peek()
        return tok[0] == kind and (value is None or tok[1] == value)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, kind: str, value: Any = None, what: str | None = None):
        if not self.at(kind, value):
            tok = self.peek()
            found = repr(tok[1]) if tok[0] != "eof" else "end of input"
            raise ScriptSyntaxError(f"expected {what or value or kind}, found {found}",
                                    self.text, tok[2])
        return self.take()

    def nest(self):
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise ScriptSyntaxError(f"expression nested deeper than {MAX_NESTING}",
                                    self.text, self.peek()[2])

    def program(self) -> Program:
        steps = []
        bound: set[str] = set()
        while not self.at("eof"):
            if steps and self.at("op", ";"):
                self.take()
                continue
            self.expect("kw", "let")
            name = self.expect("name", what="variable name")[1]
            self.expect("op", "=")
            expr = self.expr()
            _check_tree(expr, bound, self.text, self.peek()[2])
            steps.append(Let(name, expr))
            bound.add(name)
            if not self.at("eof"):
                self.expect("op", ";")
        if not steps:
            raise ScriptSyntaxError("empty program", self.text, 0)
        if steps[-1].name != "result":
            raise ScriptSyntaxError("the last step must bind 'result'", self.text, len(self.text))
        return Program(tuple(steps))

    def expr(self) -> Expr:
        self.nest()
        try:
            if self.at("name") and self.peek(1)[:2] == ("op", "=>"):
                param = self.take()[1]
                self.take()
                return Lambda(param, self.expr())
            return self.or_()
        finally:
            self.depth -= 1

    def _chain(self, sub, ops: tuple[str, ...], kind: str = "op"):
        left = sub()
        while self.peek()[0] == kind and self.peek()[1] in ops:
            op = self.take()[1]
            left = BinOp(op, left, sub())
        return left

    def or_(self):
        return self._chain(self.and_, ("or",), "kw")

    def and_(self):
        return self._chain(self.not_, ("and",), "kw")

    def not_(self):
        if self.at("kw", "not"):
            self.take()
            self.nest()
            try:
                return Not(self.not_())
            finally:
                self.depth -= 1
        return self.cmp()

    def cmp(self):
        left = self.add()
        if self.peek()[0] == "op" and self.peek()[1] in ("==", "!=", "<", ">", "<=", ">="):
            op = self.take()[1]
            return BinOp(op, left, self.add())
        return left

    def add(self):
        return self._chain(self.mul, ("+", "-"))

    def mul(self):
        left = self._chain(self.unary, ("*", "/", "×", "÷"))
        return left

    def unary(self):
        if self.at("op", "-"):
            self.take()
            if self.at("number"):
                return Lit(-self.take()[1])
            self.nest()
            try:
                return Neg(self.unary())
            finally:
                self.depth -= 1
        return self.primary()

    def _args(self, closer: str) -> tuple:
        items = []
        if not self.at("op", closer):
            while True:
                items.append(self.expr())
                if not self.at("op", ","):
                    break
                self.take()
        self.expect("op", closer)
        return tuple(items)

    def primary(self):
        tok = self.peek()
        if tok[0] in ("number", "string"):
            self.take()
            return Lit(tok[1])
        if tok[0] == "kw" and tok[1] in ("true", "false", "null"):
            self.take()
            return Lit({"true": True, "false": False, "null": None}[tok[1]])
        if tok[:2] == ("op", "["):
            self.take()
            self.nest()
            try:
                return ListExpr(self._args("]"))
            finally:
                self.depth -= 1
        if tok[:2] == ("op", "("):
            self.take()
            inner = self.expr()
            self.expect("op", ")")
            return inner
        if tok[0] == "name":
            self.take()
            if self.at("op", "("):
                self.take()
                self.nest()
                try:
                    return Call(tok[1], self._args(")"))
                finally:
                    self.depth -= 1
            return Var(tok[1])
        found = repr(tok[1]) if tok[0] != "eof" else "end of input"
        raise ScriptSyntaxError(f"expected an expression, found {found}", self.text, tok[2])


def _check_tree(expr: Expr, bound: set[str], text: str, offset: int) -> None:
    """Reject unbound names and trees too deep to evaluate recursively."""
    stack = [(expr, frozenset(), 1)]
    while stack:
        node, params, depth = stack.pop()
        if depth > MAX_DEPTH:
            raise ScriptSyntaxError(f"expression tree deeper than {MAX_DEPTH}", text, offset)
        depth += 1
        if isinstance(node, Var):
            if node.name not in bound and node.name not in params:
                raise ScriptSyntaxError(f"name {node.name!r} is not bound", text, offset)
        elif isinstance(node, Lambda):
            stack.append((node.body, params | {node.param}, depth))
        elif isinstance(node, BinOp):
            stack.extend([(node.left, params, depth), (node.right, params, depth)])
        elif isinstance(node, (Not, Neg)):
            stack.append((node.operand, params, depth))
        elif isinstance(node, ListExpr):
            stack.extend((item, params, depth) for item in node.items)
        elif isinstance(node, Call):
            stack.extend((arg, params, depth) for arg in node.args)


def parse_program(text: str) -> Program:
    return _Parser(text).program()


def parse_expression(text: str, names: set[str] | None = None) -> Expr:
    parser = _Parser(text)
    expr = parser.expr()
    parser.expect("eof", what="end of input")
    _check_tree(expr, set(names or ()), text, 0)
    return expr


# -- printing -----------------------------------------------------------------

def _format_string(value: str) -> str:
    out = ['"']
    for ch in value:
        if ch in '"\\':
            out.append("\\" + ch)
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
    out.append('"')
    return "".join(out)


def format_expr(expr: Expr) -> str:
    if isinstance(expr, Lit):
        v = expr.value
        if v is None:
            return "null"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return _format_string(v)
        return repr(v)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, ListExpr):
        return "[" + ", ".join(format_expr(i) for i in expr.items) + "]"
    if isinstance(expr, Call):
        return f"{expr.name}(" + ", ".join(format_expr(a) for a in expr.args) + ")"
    if isinstance(expr, BinOp):
        return f"({format_expr(expr.left)} {expr.op} {format_expr(expr.right)})"
    if isinstance(expr, Not):
        return f"(not {format_expr(expr.operand)})"
    if isinstance(expr, Neg):
        return f"(-{format_expr(expr.operand)})"
    if isinstance(expr, Lambda):
        return f"({expr.param} => {format_expr(expr.body)})"
    raise TypeError(f"not an expression: {expr!r}")


def format_program(program: Program) -> str:
    return ";\n".join(f"let {s.name} = {format_expr(s.expr)}" for s in program.steps)
