"""Substitution-tree index over preorder-encoded terms.

Terms are interned: structurally equal terms share one trie path, one
term id, and one leaf; harvest ids accumulate in postings. Queries run
a pruned trie traversal (query variables skip whole indexed subterms,
indexed variables skip whole query subterms) and every surviving
candidate is verified by full unification, which settles repeated
variables and the occurs check. The contract is exact: query results
equal a brute-force unify filter over all indexed terms.
"""

from __future__ import annotations

from dataclasses import dataclass

from .terms import Apply, IndexVar, QVar, term_tokens

__all__ = ["Substitution", "unify", "SubstitutionIndex"]


def _is_var(term) -> bool:
    return isinstance(term, (IndexVar, QVar))


def _var_key(term) -> tuple:
    if isinstance(term, IndexVar):
        return ("i", term.id)
    return ("q", term.name)


@dataclass
class Substitution:
    """Mapping from tagged variables ('i', id) / ('q', name) to terms.
    Triangular form: bound values may mention variables bound later."""

    mapping: dict

    def apply(self, term):
        if _is_var(term):
            key = _var_key(term)
            if key in self.mapping:
                return self.apply(self.mapping[key])
            return term
        if isinstance(term, Apply):
            return Apply(term.head, tuple(self.apply(a) for a in term.args))
        return term


def unify(q, t) -> Substitution | None:
    """First-order syntactic unification with occurs check. Variables on
    either side bind to whole subterms; repeated variables must agree.
    Returns None on failure."""
    mapping: dict = {}

    def resolve(term):
        while _is_var(term):
            bound = mapping.get(_var_key(term))
            if bound is None:
                return term
            term = bound
        return term

    def occurs(key, term) -> bool:
        term = resolve(term)
        if _is_var(term):
            return _var_key(term) == key
        if isinstance(term, Apply):
            return any(occurs(key, a) for a in term.args)
        return False

    def uni(a, b) -> bool:
        a, b = resolve(a), resolve(b)
        if _is_var(a) and _is_var(b) and _var_key(a) == _var_key(b):
            return True
        if _is_var(a):
            if occurs(_var_key(a), b):
                return False
            mapping[_var_key(a)] = b
            return True
        if _is_var(b):
            return uni(b, a)
        if isinstance(a, Apply) and isinstance(b, Apply):
            if a.head != b.head or len(a.args) != len(b.args):
                return False
            return all(uni(x, y) for x, y in zip(a.args, b.args))
        return a == b

    if uni(q, t):
        return Substitution(mapping)
    return None


class _Node:
    __slots__ = ("children", "leaf")

    def __init__(self):
        self.children: dict = {}
        self.leaf: int | None = None


def _subterm_extents(tokens) -> list[int]:
    """extents[i] = index one past the subterm rooted at token i."""
    extents = [0] * len(tokens)

    def scan(i: int) -> int:
        tok = tokens[i]
        end = i + 1
        if tok[0] == "SYM":
            for _ in range(tok[3]):
                end = scan(end)
        extents[i] = end
        return end

    pos = 0
    while pos < len(tokens):
        pos = scan(pos)
    return extents


# Estimate constants for stats(): per trie node (object + child dict
# slot), per interned term (intern table + leaf bookkeeping), and per
# posting (list slot + id string). Coarse, but linear in the real cost.
_NODE_BYTES = 112
_TERM_BYTES = 96
_POSTING_BYTES = 64


class SubstitutionIndex:
    """Append-only index; single writer, concurrent readers between
    writes (callers serialize, see the service)."""

    def __init__(self):
        self._root = _Node()
        self._term_ids: dict = {}
        self._terms: list = []
        self._postings: list[list[str]] = []
        self._node_count = 1
        self._token_count = 0

    def __len__(self) -> int:
        return len(self._terms)

    def insert(self, term, harvest_id: str) -> int:
        """Add one term occurrence; returns the interned term id."""
        if _contains_qvar(term):
            raise ValueError("index terms must not contain query variables")
        term_id = self._term_ids.get(term)
        if term_id is not None:
            self._postings[term_id].append(harvest_id)
            return term_id
        tokens = tuple(term_tokens(term))
        node = self._root
        for tok in tokens:
            child = node.children.get(tok)
            if child is None:
                child = _Node()
                node.children[tok] = child
                self._node_count += 1
            node = child
        term_id = len(self._terms)
        node.leaf = term_id
        self._term_ids[term] = term_id
        self._terms.append(term)
        self._postings.append([harvest_id])
        self._token_count += len(tokens)
        return term_id

    def term(self, term_id: int):
        return self._terms[term_id]

    def query(self, q) -> list[tuple[str, int, Substitution]]:
        """All postings whose term unifies with `q`, as (harvestId,
        termId, substitution), ordered by termId then harvestId."""
        qtokens = term_tokens(q)
        extents = _subterm_extents(qtokens)
        candidates = self._candidates(qtokens, extents)
        hits: list[tuple[str, int, Substitution]] = []
        for term_id in sorted(candidates):
            subst = unify(q, self._terms[term_id])
            if subst is None:
                continue
            for harvest_id in sorted(self._postings[term_id]):
                hits.append((harvest_id, term_id, subst))
        return hits

    def _candidates(self, qtokens, extents) -> set[int]:
        """Trie traversal: collect term ids whose token paths could
        unify with the query tokens, ignoring variable consistency."""
        found: set[int] = set()
        seen: set = set()
        stack = [(self._root, 0)]
        while stack:
            node, pos = stack.pop()
            if (id(node), pos) in seen:
                continue
            seen.add((id(node), pos))
            if pos == len(qtokens):
                if node.leaf is not None:
                    found.add(node.leaf)
                continue
            tok = qtokens[pos]
            if tok[0] in ("QVAR", "IVAR"):
                # A query-side variable swallows one whole indexed subterm.
                for child in _consume_subterms(node, 1):
                    stack.append((child, pos + 1))
            else:
                child = node.children.get(tok)
                if child is not None:
                    stack.append((child, pos + 1))
            # An indexed variable swallows the whole query subterm here.
            for ctok, child in node.children.items():
                if ctok[0] == "IVAR":
                    stack.append((child, extents[pos]))
        return found

    def stats(self) -> dict:
        return {
            "termCount": len(self._terms),
            "postingCount": sum(len(p) for p in self._postings),
            "tokenCount": self._token_count,
            "approxBytes": (self._node_count * _NODE_BYTES
                            + len(self._terms) * _TERM_BYTES
                            + sum(len(p) for p in self._postings) * _POSTING_BYTES),
        }

    def all_terms(self):
        """(termId, term, postings) triples; used by tests and rebuilds."""
        for term_id, term in enumerate(self._terms):
            yield term_id, term, tuple(self._postings[term_id])


def _consume_subterms(node: _Node, need: int):
    """Yield every node reachable from `node` by consuming exactly
    `need` complete subterms of the trie."""
    if need == 0:
        yield node
        return
    for tok, child in node.children.items():
        grow = tok[3] if tok[0] == "SYM" else 0
        yield from _consume_subterms(child, need - 1 + grow)


def _contains_qvar(term) -> bool:
    if isinstance(term, QVar):
        return True
    if isinstance(term, Apply):
        return any(_contains_qvar(a) for a in term.args)
    return False
