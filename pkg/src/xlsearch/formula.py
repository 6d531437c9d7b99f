"""Spreadsheet formula tokenizer, parser, and unparser.

The grammar is Excel-style A1 syntax, optionally extended with query
variables written `?name`. Parsing produces a small immutable AST;
`unparse` renders it back with minimal parentheses so that
``parse_formula(unparse(ast))`` is structurally equal to ``ast``.

Operator precedence, loosest to tightest: comparisons, `&`, `+ -`,
`* /`, `^`, unary `- +`, postfix `%`. All binary operators are
left-associative except `^`, which is right-associative.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .grid import CellAddr, letters_to_col

__all__ = [
    "ParseError",
    "Number",
    "Text",
    "Boolean",
    "ErrorLit",
    "CellRef",
    "RangeRef",
    "FuncCall",
    "BinOp",
    "UnaryOp",
    "Percent",
    "QueryVar",
    "parse_formula",
    "unparse",
    "ref_to_coords",
    "coords_to_ref",
    "canonical_number_lexeme",
    "shift_references",
    "ERROR_LITERALS",
]

ERROR_LITERALS = ("#DIV/0!", "#N/A", "#NAME?", "#NULL!", "#NUM!", "#REF!", "#VALUE!")

BINARY_OPS = {
    "=": "eq", "<>": "neq", "<": "lt", ">": "gt", "<=": "le", ">=": "ge",
    "&": "concat", "+": "add", "-": "sub", "*": "mul", "/": "div", "^": "pow",
}
OP_TEXT = {v: k for k, v in BINARY_OPS.items()}

# Precedence levels; unary and postfix sit above every binary operator.
_PREC = {
    "eq": 1, "neq": 1, "lt": 1, "gt": 1, "le": 1, "ge": 1,
    "concat": 2, "add": 3, "sub": 3, "mul": 4, "div": 4, "pow": 5,
}
_PREC_UNARY = 6
_PREC_PERCENT = 7
_PREC_ATOM = 8


class ParseError(ValueError):
    """Formula syntax error; `position` is a 0-based offset into the input."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Number:
    lexeme: str


@dataclass(frozen=True)
class Text:
    value: str


@dataclass(frozen=True)
class Boolean:
    value: bool


@dataclass(frozen=True)
class ErrorLit:
    code: str


@dataclass(frozen=True)
class CellRef:
    addr: CellAddr


@dataclass(frozen=True)
class RangeRef:
    start: CellAddr
    end: CellAddr


@dataclass(frozen=True)
class FuncCall:
    name: str
    args: tuple


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class UnaryOp:
    op: str
    child: object


@dataclass(frozen=True)
class Percent:
    child: object


@dataclass(frozen=True)
class QueryVar:
    name: str


def canonical_number_lexeme(raw: str) -> str:
    """Normalize a numeric literal: no leading zeros (except `0.x`), no
    trailing fractional zeros, lowercase `e` kept only if the source had
    an exponent."""
    mantissa, exp = raw, None
    for marker in ("e", "E"):
        if marker in raw:
            mantissa, exp = raw.split(marker, 1)
            break
    if "." in mantissa:
        int_part, frac = mantissa.split(".", 1)
        frac = frac.rstrip("0")
    else:
        int_part, frac = mantissa, ""
    int_part = int_part.lstrip("0") or "0"
    out = int_part + ("." + frac if frac else "")
    if exp is not None:
        out += "e" + str(int(exp))
    return out


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOK_NUMBER = re.compile(r"(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_TOK_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")
_TOK_REF_BODY = re.compile(r"(\$?)([A-Za-z]+)(\$?)([0-9]+)")
_TOK_QVAR = re.compile(r"[A-Za-z0-9_]+")
_REF_SHAPE = re.compile(r"[A-Za-z]+[0-9]+$")


@dataclass(frozen=True)
class _Token:
    kind: str  # NUM STR ERR REF NAME QVAR OP END
    value: object
    pos: int
    end: int


def _lex_string(text: str, pos: int) -> tuple[str, int]:
    chunks = []
    i = pos + 1
    while i < len(text):
        ch = text[i]
        if ch == '"':
            if i + 1 < len(text) and text[i + 1] == '"':
                chunks.append('"')
                i += 2
                continue
            return "".join(chunks), i + 1
        chunks.append(ch)
        i += 1
    raise ParseError("unterminated string literal", pos)


def _lex_sheet_quoted(text: str, pos: int) -> tuple[str, int]:
    chunks = []
    i = pos + 1
    while i < len(text):
        ch = text[i]
        if ch == "'":
            if i + 1 < len(text) and text[i + 1] == "'":
                chunks.append("'")
                i += 2
                continue
            return "".join(chunks), i + 1
        chunks.append(ch)
        i += 1
    raise ParseError("unterminated quoted sheet name", pos)


def _lex_ref_body(text: str, pos: int, sheet: str | None,
                  tok_start: int) -> tuple[_Token, int]:
    """Lex `$?LETTERS$?DIGITS` at `pos`; `tok_start` marks where the full
    reference token began (the sheet prefix, if any)."""
    m = _TOK_REF_BODY.match(text, pos)
    if not m:
        raise ParseError("expected a cell reference", pos)
    addr = CellAddr(
        col=letters_to_col(m.group(2)),
        row=int(m.group(4)),
        sheet=sheet,
        col_abs=bool(m.group(1)),
        row_abs=bool(m.group(3)),
    )
    return _Token("REF", addr, tok_start, m.end()), m.end()


def tokenize(text: str, allow_query_vars: bool = False) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == '"':
            value, end = _lex_string(text, i)
            tokens.append(_Token("STR", value, i, end))
            i = end
            continue
        if ch == "#":
            for lit in ERROR_LITERALS:
                if text[i:i + len(lit)].upper() == lit:
                    tokens.append(_Token("ERR", lit, i, i + len(lit)))
                    i += len(lit)
                    break
            else:
                raise ParseError("unknown error literal", i)
            continue
        if ch == "?":
            if not allow_query_vars:
                raise ParseError("query variables are not allowed here", i)
            m = _TOK_QVAR.match(text, i + 1)
            if not m:
                raise ParseError("expected a name after '?'", i)
            tokens.append(_Token("QVAR", m.group(0), i, m.end()))
            i = m.end()
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            m = _TOK_NUMBER.match(text, i)
            tokens.append(_Token("NUM", m.group(0), i, m.end()))
            i = m.end()
            continue
        if ch == "'":
            sheet, after = _lex_sheet_quoted(text, i)
            if after >= n or text[after] != "!":
                raise ParseError("quoted sheet name must be followed by '!'", i)
            token, i = _lex_ref_body(text, after + 1, sheet, i)
            tokens.append(token)
            continue
        if ch == "$":
            token, i = _lex_ref_body(text, i, None, i)
            tokens.append(token)
            continue
        if ch.isalpha() or ch == "_":
            m = _TOK_NAME.match(text, i)
            chunk = m.group(0)
            after = m.end()
            if after < n and text[after] == "!":
                token, i = _lex_ref_body(text, after + 1, chunk, i)
                tokens.append(token)
                continue
            if (after < n and text[after] == "$" and chunk.isalpha()
                    and after + 1 < n and text[after + 1].isdigit()):
                # row-anchored ref such as A$1
                token, i = _lex_ref_body(text, i, None, i)
                tokens.append(token)
                continue
            if after < n and text[after] == "(":
                tokens.append(_Token("NAME", chunk, i, after))
                i = after
                continue
            if chunk.upper() in ("TRUE", "FALSE"):
                tokens.append(_Token("NAME", chunk, i, after))
                i = after
                continue
            if _REF_SHAPE.fullmatch(chunk):
                token, i = _lex_ref_body(text, i, None, i)
                tokens.append(token)
                continue
            tokens.append(_Token("NAME", chunk, i, after))
            i = after
            continue
        two = text[i:i + 2]
        if two in ("<>", "<=", ">="):
            tokens.append(_Token("OP", two, i, i + 2))
            i += 2
            continue
        if ch in "=<>+-*/^&%(),;:":
            tokens.append(_Token("OP", ch, i, i + 1))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("END", None, n, n))
    return tokens


# ---------------------------------------------------------------------------
# Parser (precedence climbing)
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect_op(self, op: str):
        token = self.peek()
        if token.kind != "OP" or token.value != op:
            raise ParseError(f"expected {op!r}", token.pos)
        return self.advance()

    def parse_expr(self, min_prec: int = 1):
        node = self.parse_unary()
        while True:
            token = self.peek()
            if token.kind != "OP" or token.value not in BINARY_OPS:
                return node
            op = BINARY_OPS[token.value]
            prec = _PREC[op]
            if prec < min_prec:
                return node
            self.advance()
            next_min = prec if op == "pow" else prec + 1
            right = self.parse_expr(next_min)
            node = BinOp(op, node, right)

    def parse_unary(self):
        token = self.peek()
        if token.kind == "OP" and token.value in ("-", "+"):
            self.advance()
            return UnaryOp("neg" if token.value == "-" else "plus", self.parse_unary())
        return self.parse_postfix()

    def parse_postfix(self):
        node = self.parse_primary()
        while True:
            token = self.peek()
            if token.kind == "OP" and token.value == "%":
                self.advance()
                node = Percent(node)
            else:
                return node

    def parse_primary(self):
        token = self.advance()
        if token.kind == "NUM":
            return Number(canonical_number_lexeme(token.value))
        if token.kind == "STR":
            return Text(token.value)
        if token.kind == "ERR":
            return ErrorLit(token.value)
        if token.kind == "QVAR":
            return QueryVar(token.value)
        if token.kind == "REF":
            start = token.value
            nxt = self.peek()
            if nxt.kind == "OP" and nxt.value == ":":
                self.advance()
                end_token = self.advance()
                if end_token.kind != "REF":
                    raise ParseError("expected a cell reference after ':'", end_token.pos)
                return RangeRef(start, end_token.value)
            return CellRef(start)
        if token.kind == "NAME":
            nxt = self.peek()
            if nxt.kind == "OP" and nxt.value == "(":
                return self.parse_call(token.value.upper())
            if token.value.upper() == "TRUE":
                return Boolean(True)
            if token.value.upper() == "FALSE":
                return Boolean(False)
            raise ParseError(f"unexpected name {token.value!r}", token.pos)
        if token.kind == "OP" and token.value == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        raise ParseError(
            "unexpected end of formula" if token.kind == "END"
            else f"unexpected token {token.value!r}",
            token.pos,
        )

    def parse_call(self, name: str):
        self.expect_op("(")
        args = []
        token = self.peek()
        if token.kind == "OP" and token.value == ")":
            self.advance()
            return FuncCall(name, ())
        while True:
            token = self.peek()
            if token.kind == "OP" and token.value in (",", ";", ")"):
                raise ParseError("empty function argument", token.pos)
            args.append(self.parse_expr())
            token = self.advance()
            if token.kind == "OP" and token.value in (",", ";"):
                continue
            if token.kind == "OP" and token.value == ")":
                return FuncCall(name, tuple(args))
            raise ParseError("expected ',' or ')' in argument list", token.pos)


def parse_formula(text: str, allow_query_vars: bool = False):
    """Parse formula text (optional leading '=') into an AST."""
    stripped = text.strip().removeprefix("=").strip()
    if not stripped:
        raise ParseError("empty formula", 0)
    parser = _Parser(tokenize(stripped, allow_query_vars))
    node = parser.parse_expr()
    trailing = parser.peek()
    if trailing.kind != "END":
        raise ParseError(f"unexpected token {trailing.value!r}", trailing.pos)
    return node


# ---------------------------------------------------------------------------
# Unparser
# ---------------------------------------------------------------------------

def _node_prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, UnaryOp):
        return _PREC_UNARY
    if isinstance(node, Percent):
        return _PREC_PERCENT
    return _PREC_ATOM


def _render(node, min_prec: int) -> str:
    prec = _node_prec(node)
    text = _render_bare(node)
    if prec < min_prec:
        return "(" + text + ")"
    return text


def _render_bare(node) -> str:
    if isinstance(node, Number):
        return node.lexeme
    if isinstance(node, Text):
        return '"' + node.value.replace('"', '""') + '"'
    if isinstance(node, Boolean):
        return "TRUE" if node.value else "FALSE"
    if isinstance(node, ErrorLit):
        return node.code
    if isinstance(node, CellRef):
        return node.addr.a1()
    if isinstance(node, RangeRef):
        return f"{node.start.a1()}:{node.end.a1()}"
    if isinstance(node, QueryVar):
        return "?" + node.name
    if isinstance(node, FuncCall):
        return node.name + "(" + ",".join(_render(a, 1) for a in node.args) + ")"
    if isinstance(node, Percent):
        return _render(node.child, _PREC_PERCENT) + "%"
    if isinstance(node, UnaryOp):
        sign = "-" if node.op == "neg" else "+"
        return sign + _render(node.child, _PREC_UNARY)
    if isinstance(node, BinOp):
        prec = _PREC[node.op]
        if node.op == "pow":
            left, right = _render(node.left, prec + 1), _render(node.right, prec)
        else:
            left, right = _render(node.left, prec), _render(node.right, prec + 1)
        return left + OP_TEXT[node.op] + right
    raise TypeError(f"not an AST node: {node!r}")


def unparse(node) -> str:
    """Render an AST with minimal parentheses; `,` separates arguments."""
    return _render(node, 1)


# ---------------------------------------------------------------------------
# Reference helpers
# ---------------------------------------------------------------------------

def ref_to_coords(text: str) -> CellAddr:
    """Decode `(sheet!)?$?LETTERS$?DIGITS` to a coordinate pair with flags."""
    tokens = tokenize(text.strip())
    if len(tokens) != 2 or tokens[0].kind != "REF":
        raise ParseError("not a cell reference", 0)
    return tokens[0].value


def coords_to_ref(addr: CellAddr) -> str:
    """Inverse of ref_to_coords."""
    return addr.a1()


def shift_references(text: str, d_row: int, d_col: int) -> str:
    """Shift every relative reference in formula text by (d_row, d_col).

    Non-reference tokens are copied byte for byte from the source; raises
    ValueError when a shift would leave the grid.
    """
    tokens = tokenize(text, allow_query_vars=True)
    out = []
    cursor = 0
    for token in tokens:
        if token.kind == "END":
            break
        out.append(text[cursor:token.pos])
        if token.kind == "REF":
            out.append(token.value.shifted(d_row, d_col).a1())
        else:
            out.append(text[token.pos:token.end])
        cursor = token.end
    out.append(text[cursor:])
    return "".join(out)
