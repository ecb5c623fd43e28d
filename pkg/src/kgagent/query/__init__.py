"""KGQL: a small Cypher-like language for reading and growing the task graph."""

from kgagent.query.ast import Query, format_query
from kgagent.query.evaluator import QueryError, ResultTable, WriteSummary, execute_read, execute_write
from kgagent.query.lexer import ParseError, Token, tokenize
from kgagent.query.parser import parse
from kgagent.query.partition import (
    dependency_chains, execute_chains, partition_independent, signatures,
)
from kgagent.query.repair import repair_text

__all__ = [
    "ParseError", "Query", "QueryError", "ResultTable", "Token", "WriteSummary",
    "dependency_chains", "execute_chains", "execute_read", "execute_write", "format_query",
    "parse", "partition_independent", "repair_text", "signatures", "tokenize",
]
