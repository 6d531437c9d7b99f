"""Canonical term representation of formulas.

Converts parsed formula ASTs to operator terms over a symbol vocabulary
(loaded from a tab-separated data file), optionally replacing cell and
range references with numbered variables so that structurally identical
formulas in different locations produce the same term. Terms serialize
to content MathML and to a flat preorder token sequence used by the
index.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from importlib import resources
from xml.sax.saxutils import escape, quoteattr

from . import formula as F

__all__ = [
    "MATHML_NS",
    "QUERY_NS",
    "CDGROUP",
    "SymbolId",
    "SymbolTable",
    "load_symbol_table",
    "lookup_symbol",
    "Apply",
    "Sym",
    "Num",
    "Str",
    "IndexVar",
    "QVar",
    "CELLREF_SYMBOL",
    "RANGE_SYMBOL",
    "ast_to_term",
    "term_to_mathml",
    "mathml_to_term",
    "term_tokens",
    "decode_tokens",
    "renumber_vars",
    "term_has_vars",
]

MATHML_NS = "http://www.w3.org/1998/Math/MathML"
QUERY_NS = "http://search.mathweb.org/ns"
CDGROUP = "http://oaff.info/spshp/"

DIALECTS = ("generic", "excel", "openoffice")


@dataclass(frozen=True)
class SymbolId:
    cd: str
    name: str


# Structural heads for non-variablized references: cellref [col, row],
# range [c1, r1, c2, r2].
CELLREF_SYMBOL = SymbolId("spshform", "cellref")
RANGE_SYMBOL = SymbolId("spshform", "range")

# Maps parser op codes to symbol-table keys.
OP_KEYS = {
    "add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^",
    "concat": "&", "eq": "=", "neq": "<>", "lt": "<", "gt": ">",
    "le": "<=", "ge": ">=", "neg": "u-", "plus": "u+",
}

ERROR_SYMBOLS = {
    "#DIV/0!": SymbolId("spsht-error", "errDiv0"),
    "#N/A": SymbolId("spsht-error", "errNA"),
    "#NAME?": SymbolId("spsht-error", "errName"),
    "#NULL!": SymbolId("spsht-error", "errNull"),
    "#NUM!": SymbolId("spsht-error", "errNum"),
    "#REF!": SymbolId("spsht-error", "errRef"),
    "#VALUE!": SymbolId("spsht-error", "errValue"),
}


class SymbolTable:
    """Vocabulary bound to a dialect. Lookup order: dialect override,
    generic entry, then a total fallback to (spsht-unknown, KEY)."""

    def __init__(self, generic: dict, overrides: dict, dialect: str = "generic"):
        if dialect not in DIALECTS:
            raise ValueError(f"unknown dialect {dialect!r}")
        self.dialect = dialect
        self._generic = generic
        self._overrides = overrides

    def lookup(self, key: str) -> SymbolId:
        key = key.upper()
        hit = self._overrides.get(self.dialect, {}).get(key)
        if hit is None:
            hit = self._generic.get(key)
        if hit is None:
            hit = SymbolId("spsht-unknown", key)
        return hit

    def with_dialect(self, dialect: str) -> "SymbolTable":
        return SymbolTable(self._generic, self._overrides, dialect)

    def __len__(self) -> int:
        return len(self._generic)


def load_symbol_table(path=None, dialect: str = "generic") -> SymbolTable:
    """Load the vocabulary from a TSV file (the packaged table when
    `path` is None).

    Row format: KEY<TAB>CD<TAB>NAME<TAB>DIALECT(optional); '#' comments.
    """
    if path is None:
        text = resources.files("xlsearch").joinpath("data/symbols.tsv").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    generic: dict[str, SymbolId] = {}
    overrides: dict[str, dict[str, SymbolId]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) not in (3, 4):
            raise ValueError(f"symbols line {lineno}: expected 3 or 4 fields")
        key, cd, name = fields[0].strip().upper(), fields[1].strip(), fields[2].strip()
        if not key or not cd or not name:
            raise ValueError(f"symbols line {lineno}: empty field")
        row_dialect = fields[3].strip() if len(fields) == 4 and fields[3].strip() else "generic"
        if row_dialect not in DIALECTS:
            raise ValueError(f"symbols line {lineno}: unknown dialect {row_dialect!r}")
        if row_dialect == "generic":
            generic[key] = SymbolId(cd, name)
        else:
            overrides.setdefault(row_dialect, {})[key] = SymbolId(cd, name)
    return SymbolTable(generic, overrides, dialect)


_DEFAULT_TABLE: SymbolTable | None = None


def _default_table() -> SymbolTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = load_symbol_table()
    return _DEFAULT_TABLE


def lookup_symbol(key: str, dialect: str = "generic", table: SymbolTable | None = None) -> SymbolId:
    if table is None:
        table = _default_table()
    return table.with_dialect(dialect).lookup(key)


# ---------------------------------------------------------------------------
# Term nodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Apply:
    """Symbol applied to one or more arguments. Zero-argument calls are
    canonicalized to Sym."""
    head: SymbolId
    args: tuple


@dataclass(frozen=True)
class Sym:
    sym: SymbolId


@dataclass(frozen=True)
class Num:
    lexeme: str


@dataclass(frozen=True)
class Str:
    text: str


@dataclass(frozen=True)
class IndexVar:
    """Variablized reference; rendered "X<id>". Within one term the ids
    are 0..k-1 in order of first preorder occurrence."""
    id: int


@dataclass(frozen=True)
class QVar:
    name: str


def _ref_key(addr) -> tuple:
    return (addr.sheet, addr.col, addr.row, addr.col_abs, addr.row_abs)


def ast_to_term(ast, table: SymbolTable, variablize: bool = False):
    """Convert a formula AST to a term.

    With `variablize` on, references become IndexVars: references with
    equal identity keys (sheet, column, row, and both absoluteness
    flags; ranges compare endpoint pairs) share one variable, and ids
    count up from 0 in first-occurrence order.
    """
    refs: dict = {}

    def var_for(key) -> IndexVar:
        if key not in refs:
            refs[key] = IndexVar(len(refs))
        return refs[key]

    def walk(node):
        if isinstance(node, F.Number):
            return Num(node.lexeme)
        if isinstance(node, F.Text):
            return Str(node.value)
        if isinstance(node, F.Boolean):
            return Sym(SymbolId("spsht-bool", "true" if node.value else "false"))
        if isinstance(node, F.ErrorLit):
            return Sym(ERROR_SYMBOLS[node.code])
        if isinstance(node, F.QueryVar):
            return QVar(node.name)
        if isinstance(node, F.CellRef):
            if variablize:
                return var_for(_ref_key(node.addr))
            return Apply(CELLREF_SYMBOL,
                         (Num(str(node.addr.col)), Num(str(node.addr.row))))
        if isinstance(node, F.RangeRef):
            if variablize:
                return var_for((_ref_key(node.start), _ref_key(node.end)))
            return Apply(RANGE_SYMBOL,
                         (Num(str(node.start.col)), Num(str(node.start.row)),
                          Num(str(node.end.col)), Num(str(node.end.row))))
        if isinstance(node, F.FuncCall):
            args = tuple(walk(a) for a in node.args)
            head = table.lookup(node.name)
            return Apply(head, args) if args else Sym(head)
        if isinstance(node, F.BinOp):
            head = table.lookup(OP_KEYS[node.op])
            return Apply(head, (walk(node.left), walk(node.right)))
        if isinstance(node, F.UnaryOp):
            return Apply(table.lookup(OP_KEYS[node.op]), (walk(node.child),))
        if isinstance(node, F.Percent):
            return Apply(table.lookup("%"), (walk(node.child),))
        raise TypeError(f"not an AST node: {node!r}")

    return walk(ast)


def term_has_vars(term) -> bool:
    if isinstance(term, (IndexVar, QVar)):
        return True
    if isinstance(term, Apply):
        return any(term_has_vars(a) for a in term.args)
    return False


# ---------------------------------------------------------------------------
# MathML
# ---------------------------------------------------------------------------

def term_to_mathml(term) -> str:
    """Serialize to a compact content-MathML `math` element. Concrete
    terms carry the cdgroup attribute; terms with variables bind the
    `q` prefix for qvar elements instead."""
    parts: list[str] = []
    _emit(term, parts)
    body = "".join(parts)
    if term_has_vars(term):
        return f'<math xmlns="{MATHML_NS}" xmlns:q="{QUERY_NS}">{body}</math>'
    return f'<math xmlns="{MATHML_NS}" cdgroup="{CDGROUP}">{body}</math>'


def _emit(term, parts: list[str]):
    if isinstance(term, Apply):
        parts.append("<apply>")
        _emit(Sym(term.head), parts)
        for arg in term.args:
            _emit(arg, parts)
        parts.append("</apply>")
    elif isinstance(term, Sym):
        parts.append(f"<csymbol cd={quoteattr(term.sym.cd)}>{escape(term.sym.name)}</csymbol>")
    elif isinstance(term, Num):
        parts.append(f"<mn>{escape(term.lexeme)}</mn>")
    elif isinstance(term, Str):
        parts.append(f"<ms>{escape(term.text)}</ms>")
    elif isinstance(term, IndexVar):
        parts.append(f'<q:qvar name="X{term.id}"/>')
    elif isinstance(term, QVar):
        parts.append(f"<q:qvar name={quoteattr(term.name)}/>")
    else:
        raise TypeError(f"not a term: {term!r}")


_INDEX_VAR_NAME = re.compile(r"X([0-9]+)$")

_TAG_MATH = f"{{{MATHML_NS}}}math"
_TAG_APPLY = f"{{{MATHML_NS}}}apply"
_TAG_CSYMBOL = f"{{{MATHML_NS}}}csymbol"
_TAG_MN = f"{{{MATHML_NS}}}mn"
_TAG_MS = f"{{{MATHML_NS}}}ms"
_TAG_QVAR = f"{{{QUERY_NS}}}qvar"
_TAG_QVAR_ALT = f"{{{MATHML_NS}}}qvar"


def mathml_to_term(xml_text: str):
    """Parse a `math` element back to a term. qvar names of the form
    X<digits> decode as index variables, anything else as query
    variables."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise ValueError(f"bad MathML: {exc}") from None
    if root.tag != _TAG_MATH:
        raise ValueError(f"expected a MathML math element, got {root.tag!r}")
    children = list(root)
    if len(children) != 1:
        raise ValueError("math element must contain exactly one term")
    return _parse_element(children[0])


def _parse_element(el):
    tag = el.tag
    if tag == _TAG_APPLY:
        kids = list(el)
        if not kids or kids[0].tag != _TAG_CSYMBOL:
            raise ValueError("apply must start with a csymbol head")
        head = SymbolId(kids[0].get("cd", ""), (kids[0].text or "").strip())
        args = tuple(_parse_element(k) for k in kids[1:])
        return Apply(head, args) if args else Sym(head)
    if tag == _TAG_CSYMBOL:
        return Sym(SymbolId(el.get("cd", ""), (el.text or "").strip()))
    if tag == _TAG_MN:
        return Num((el.text or "").strip())
    if tag == _TAG_MS:
        return Str(el.text or "")
    if tag in (_TAG_QVAR, _TAG_QVAR_ALT):
        name = el.get("name")
        if not name:
            raise ValueError("qvar element missing a name")
        m = _INDEX_VAR_NAME.fullmatch(name)
        if m:
            return IndexVar(int(m.group(1)))
        return QVar(name)
    raise ValueError(f"unsupported MathML element {tag!r}")


# ---------------------------------------------------------------------------
# Token encoding
# ---------------------------------------------------------------------------

def term_tokens(term) -> list[tuple]:
    """Flatten to preorder tokens: ("SYM", cd, name, arity), ("NUM", lexeme),
    ("STR", text), ("IVAR", id), ("QVAR", name)."""
    out: list[tuple] = []

    def walk(t):
        if isinstance(t, Apply):
            out.append(("SYM", t.head.cd, t.head.name, len(t.args)))
            for a in t.args:
                walk(a)
        elif isinstance(t, Sym):
            out.append(("SYM", t.sym.cd, t.sym.name, 0))
        elif isinstance(t, Num):
            out.append(("NUM", t.lexeme))
        elif isinstance(t, Str):
            out.append(("STR", t.text))
        elif isinstance(t, IndexVar):
            out.append(("IVAR", t.id))
        elif isinstance(t, QVar):
            out.append(("QVAR", t.name))
        else:
            raise TypeError(f"not a term: {t!r}")

    walk(term)
    return out


def decode_tokens(tokens):
    """Inverse of term_tokens."""
    pos = 0

    def read():
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError("token sequence ended early")
        tok = tokens[pos]
        pos += 1
        kind = tok[0]
        if kind == "SYM":
            _, cd, name, arity = tok
            if arity == 0:
                return Sym(SymbolId(cd, name))
            return Apply(SymbolId(cd, name), tuple(read() for _ in range(arity)))
        if kind == "NUM":
            return Num(tok[1])
        if kind == "STR":
            return Str(tok[1])
        if kind == "IVAR":
            return IndexVar(tok[1])
        if kind == "QVAR":
            return QVar(tok[1])
        raise ValueError(f"unknown token kind {kind!r}")

    term = read()
    if pos != len(tokens):
        raise ValueError("trailing tokens after term")
    return term


def renumber_vars(term):
    """Renumber IndexVars to 0..k-1 by first preorder occurrence."""
    order: dict[int, int] = {}

    def scan(t):
        if isinstance(t, IndexVar):
            if t.id not in order:
                order[t.id] = len(order)
        elif isinstance(t, Apply):
            for a in t.args:
                scan(a)

    def rebuild(t):
        if isinstance(t, IndexVar):
            return IndexVar(order[t.id])
        if isinstance(t, Apply):
            return Apply(t.head, tuple(rebuild(a) for a in t.args))
        return t

    scan(term)
    return rebuild(term)
