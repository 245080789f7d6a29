"""Textual boolean query language over dataset columns.

Grammar (keywords case-insensitive, precedence not > and > or):

    query := or
    or    := and ("or" and)*
    and   := unary ("and" unary)*
    unary := "not" unary | "(" query ")" | comp
    comp  := ident (cmpop literal | "in" "[" literal ("," literal)* "]")
    cmpop := "==" | "!=" | "<" | "<=" | ">" | ">="

Identifiers match [A-Za-z_][A-Za-z0-9_]*; literals are numbers or
double-quoted text. Evaluation uses three-valued-collapse semantics: any
comparison touching a MISSING cell is false, and "not" negates the
boolean result (so ``not (x > 0)`` is true on rows where x is missing).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import QuerySyntaxError, UnknownColumnError
from .model import MISSING, Dataset, SelectionSet

COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")
KEYWORDS = ("and", "or", "not", "in")


@dataclass(frozen=True)
class Compare:
    column: str
    op: str
    value: object  # int | float | str


@dataclass(frozen=True)
class In:
    column: str
    values: tuple


@dataclass(frozen=True)
class Not:
    child: object


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


QueryAST = object  # Compare | In | Not | And | Or


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<op><=|>=|==|!=|<|>)
  | (?P<punct>[()\[\],])
    """,
    re.VERBOSE,
)


def _lex(text: str) -> list[tuple[str, str, int]]:
    """Tokenize into (kind, value, byte offset); kinds: number, ident,
    keyword, string, op, punct, end."""
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        value = m.group()
        if kind != "ws":
            if kind == "ident" and value.lower() in KEYWORDS:
                kind, value = "keyword", value.lower()
            tokens.append((kind, value, pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _unescape(raw: str) -> str:
    return raw[1:-1].replace('\\"', '"').replace("\\\\", "\\")


def _escape(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _number(raw: str):
    if re.fullmatch(r"-?\d+", raw):
        return int(raw)
    return float(raw)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _lex(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, expected: tuple[str, ...] = ()):
        _, _, offset = self.peek()
        raise QuerySyntaxError(message, offset, expected)

    def expect(self, kind: str, value: str | None = None, expected: tuple[str, ...] = ()):
        k, v, offset = self.peek()
        if k != kind or (value is not None and v != value):
            shown = expected or ((value,) if value else (kind,))
            raise QuerySyntaxError(f"got {v!r}" if v else "unexpected end of query", offset, shown)
        return self.advance()

    def parse(self):
        node = self.parse_or()
        if self.peek()[0] != "end":
            self.error(f"unexpected trailing input {self.peek()[1]!r}", ("and", "or", "end of query"))
        return node

    def parse_or(self):
        children = [self.parse_and()]
        while self.peek()[:2] == ("keyword", "or"):
            self.advance()
            children.append(self.parse_and())
        if len(children) == 1:
            return children[0]
        return Or(tuple(children))

    def parse_and(self):
        children = [self.parse_unary()]
        while self.peek()[:2] == ("keyword", "and"):
            self.advance()
            children.append(self.parse_unary())
        if len(children) == 1:
            return children[0]
        return And(tuple(children))

    def parse_unary(self):
        kind, value, _ = self.peek()
        if (kind, value) == ("keyword", "not"):
            self.advance()
            return Not(self.parse_unary())
        if (kind, value) == ("punct", "("):
            self.advance()
            node = self.parse_or()
            self.expect("punct", ")", expected=(")",))
            return node
        return self.parse_comp()

    def parse_comp(self):
        kind, value, offset = self.peek()
        if kind != "ident":
            raise QuerySyntaxError(
                f"got {value!r}" if value else "unexpected end of query",
                offset,
                ("column name", "not", "("),
            )
        self.advance()
        column = value
        kind, op, offset = self.peek()
        if kind == "op":
            self.advance()
            return Compare(column, op, self.parse_literal())
        if (kind, op) == ("keyword", "in"):
            self.advance()
            self.expect("punct", "[", expected=("[",))
            values = [self.parse_literal()]
            while self.peek()[:2] == ("punct", ","):
                self.advance()
                values.append(self.parse_literal())
            self.expect("punct", "]", expected=("]", ","))
            return In(column, tuple(values))
        raise QuerySyntaxError(
            f"got {op!r}" if op else "unexpected end of query",
            offset,
            COMPARE_OPS + ("in",),
        )

    def parse_literal(self):
        kind, value, offset = self.peek()
        if kind == "number":
            self.advance()
            return _number(value)
        if kind == "string":
            self.advance()
            return _unescape(value)
        raise QuerySyntaxError(
            f"got {value!r}" if value else "unexpected end of query",
            offset,
            ("number", "quoted text"),
        )


def parse(text: str) -> QueryAST:
    """Parse query text into an AST; raises QuerySyntaxError with the
    byte offset and the expected-token set on malformed input."""
    return _Parser(text).parse()


def _literal_text(value) -> str:
    if isinstance(value, str):
        return _escape(value)
    return repr(value)


def unparse(ast: QueryAST) -> str:
    """Canonical fully-parenthesized text; parse(unparse(a)) == a."""
    if isinstance(ast, Compare):
        return f"({ast.column} {ast.op} {_literal_text(ast.value)})"
    if isinstance(ast, In):
        inner = ", ".join(_literal_text(v) for v in ast.values)
        return f"({ast.column} in [{inner}])"
    if isinstance(ast, Not):
        return f"(not {unparse(ast.child)})"
    if isinstance(ast, And):
        return "(" + " and ".join(unparse(c) for c in ast.children) + ")"
    if isinstance(ast, Or):
        return "(" + " or ".join(unparse(c) for c in ast.children) + ")"
    raise TypeError(f"not a query AST node: {ast!r}")


def referenced_columns(ast: QueryAST) -> list[str]:
    """Column names referenced by the query, in first-mention order."""
    out: list[str] = []

    def walk(node):
        if isinstance(node, (Compare, In)):
            if node.column not in out:
                out.append(node.column)
        elif isinstance(node, Not):
            walk(node.child)
        elif isinstance(node, (And, Or)):
            for child in node.children:
                walk(child)

    walk(ast)
    return out


def _compare_cell(cell, op: str, literal) -> bool:
    """Comparison on one non-missing cell. Ordering applies between two
    numbers or two strings; mismatched kinds order as false."""
    if op == "==":
        return cell == literal
    if op == "!=":
        return cell != literal
    both_numeric = isinstance(cell, (int, float)) and isinstance(literal, (int, float))
    both_text = isinstance(cell, str) and isinstance(literal, str)
    if not (both_numeric or both_text):
        return False
    if op == "<":
        return cell < literal
    if op == "<=":
        return cell <= literal
    if op == ">":
        return cell > literal
    if op == ">=":
        return cell >= literal
    raise ValueError(f"unknown operator {op!r}")


def evaluate(ast: QueryAST, dataset: Dataset, source: str | None = None) -> SelectionSet:
    """Evaluate the query over every row, returning matching keys in
    dataset row order. Comparisons touching MISSING cells are false."""
    for name in referenced_columns(ast):
        if not dataset.has_column(name):
            raise UnknownColumnError(name, dataset.column_names())

    def run(node) -> list[bool]:
        if isinstance(node, Compare):
            values, _ = dataset.column(node.column)
            return [cell is not MISSING and _compare_cell(cell, node.op, node.value) for cell in values]
        if isinstance(node, In):
            values, _ = dataset.column(node.column)
            return [cell is not MISSING and any(cell == v for v in node.values) for cell in values]
        if isinstance(node, Not):
            return [not b for b in run(node.child)]
        if isinstance(node, And):
            results = [run(c) for c in node.children]
            return [all(bits) for bits in zip(*results)]
        if isinstance(node, Or):
            results = [run(c) for c in node.children]
            return [any(bits) for bits in zip(*results)]
        raise TypeError(f"not a query AST node: {node!r}")

    if dataset.n_rows == 0:
        mask: list[bool] = []
    else:
        mask = run(ast)
    keys = tuple(key for key, hit in zip(dataset.keys, mask) if hit)
    return SelectionSet(keys, source if source is not None else unparse(ast), dataset.fingerprint)


def select(text: str, dataset: Dataset) -> SelectionSet:
    """parse + evaluate, keeping the original text as provenance."""
    return evaluate(parse(text), dataset, source=text)
