"""HTTP search service and the query pipeline it shares with the CLI.

The daemon owns a substitution index plus a harvest store behind a
readers-writer lock: queries run concurrently, ingest takes the
exclusive write side. Query formulas arrive in native syntax with
`?name` variables; concrete references are variablized into synthetic
query variables so a pasted formula finds its own functional block and
every copy-equivalent one.
"""

from __future__ import annotations

import json
import threading
import time
from contextlib import contextmanager

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .formula import ParseError, parse_formula
from .harvest import Harvest, harvest_from_dict
from .index import SubstitutionIndex
from .terms import (Apply, IndexVar, QVar, SymbolTable, ast_to_term,
                    load_symbol_table, term_to_mathml)

__all__ = [
    "ConflictError",
    "RWLock",
    "ServiceState",
    "formula_to_query_term",
    "run_query",
    "ingest_entries",
    "save_snapshot",
    "load_snapshot",
    "create_app",
    "SNAPSHOT_FORMAT",
    "SNAPSHOT_VERSION",
]

DEFAULT_LIMIT = 20
MAX_LIMIT = 200

SNAPSHOT_FORMAT = "xlsearch-snapshot"
SNAPSHOT_VERSION = 1


class ConflictError(ValueError):
    """A harvest id resurfaced with different content."""

    def __init__(self, harvest_id: str):
        super().__init__(f"harvest id already present with different content: {harvest_id}")
        self.harvest_id = harvest_id


class RWLock:
    """Readers-writer lock: many concurrent readers, one writer, never both."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writing = False

    @contextmanager
    def read(self):
        with self._cond:
            while self._writing:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if self._readers == 0:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            while self._writing or self._readers:
                self._cond.wait()
            self._writing = True
        try:
            yield
        finally:
            with self._cond:
                self._writing = False
                self._cond.notify_all()


class ServiceState:
    def __init__(self, table: SymbolTable | None = None):
        self.table = table if table is not None else load_symbol_table(dialect="excel")
        self.index = SubstitutionIndex()
        self.harvests: dict[str, Harvest] = {}
        self.lock = RWLock()
        self.ready = False
        self.started = time.monotonic()


def _collect_qvar_names(term, names: set):
    if isinstance(term, QVar):
        names.add(term.name)
    elif isinstance(term, Apply):
        for arg in term.args:
            _collect_qvar_names(arg, names)


def formula_to_query_term(text: str, table: SymbolTable):
    """Parse query-syntax formula text and return (term, user variable
    names). Concrete references turn into synthetic query variables
    (same sharing rule as harvesting) whose prefix is freshened past any
    user name."""
    ast = parse_formula(text, allow_query_vars=True)
    term = ast_to_term(ast, table, variablize=True)
    names: set = set()
    _collect_qvar_names(term, names)
    base = "_ref"
    while any(name.startswith(base) for name in names):
        base = "_" + base

    def replace_refs(t):
        if isinstance(t, IndexVar):
            return QVar(f"{base}{t.id}")
        if isinstance(t, Apply):
            return Apply(t.head, tuple(replace_refs(a) for a in t.args))
        return t

    return replace_refs(term), sorted(names)


def run_query(state: ServiceState, formula: str, keywords=(), limit: int = DEFAULT_LIMIT,
              offset: int = 0) -> dict:
    """Execute the query pipeline; caller holds the read lock.

    Hits are filtered (every keyword must be a case-insensitive
    substring of some harvest keyword), ranked by (uri, sheet, block
    row, block column), then paginated.
    """
    term, user_names = formula_to_query_term(formula, state.table)
    lowered = [kw.lower() for kw in keywords]

    matched: list[tuple[Harvest, object]] = []
    for harvest_id, _term_id, subst in state.index.query(term):
        h = state.harvests[harvest_id]
        if all(any(kw in hk.lower() for hk in h.keywords) for kw in lowered):
            matched.append((h, subst))
    matched.sort(key=lambda pair: (pair[0].uri, pair[0].sheet,
                                   pair[0].region.r1, pair[0].region.c1))

    page = matched[offset:offset + limit]
    hits = []
    for h, subst in page:
        bindings = {name: term_to_mathml(subst.apply(QVar(name)))
                    for name in user_names}
        hits.append({
            "id": h.id,
            "uri": h.uri,
            "sheet": h.sheet,
            "region": h.region.a1(),
            "rawFormula": h.raw_formula,
            "keywords": list(h.keywords),
            "snippet": h.snippet,
            "bindings": bindings,
        })
    return {"total": len(matched), "hits": hits}


def ingest_entries(state: ServiceState, entries) -> dict:
    """Validate and apply a harvest batch; caller holds the write lock.

    Entries that fail to validate are counted as rejected; an id
    conflict raises ConflictError before anything is applied, so a
    conflicting batch changes nothing.
    """
    validated: list[Harvest] = []
    rejected = 0
    for entry in entries:
        if not isinstance(entry, dict):
            rejected += 1
            continue
        try:
            validated.append(harvest_from_dict(entry))
        except ValueError:
            rejected += 1

    duplicates = 0
    accepted: list[Harvest] = []
    batch_seen: dict[str, dict] = {}
    for h in validated:
        record = h.to_dict()
        existing = batch_seen.get(h.id)
        if existing is None and h.id in state.harvests:
            existing = state.harvests[h.id].to_dict()
        if existing is not None:
            if existing != record:
                raise ConflictError(h.id)
            duplicates += 1
            continue
        batch_seen[h.id] = record
        accepted.append(h)

    for h in accepted:
        state.index.insert(h.term, h.id)
        state.harvests[h.id] = h
    return {"accepted": len(accepted), "duplicates": duplicates, "rejected": rejected}


def save_snapshot(state: ServiceState, path):
    """Versioned snapshot of the harvest store; loading rebuilds the
    index without re-crawling."""
    payload = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "harvests": [h.to_dict() for h in state.harvests.values()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")


def load_snapshot(state: ServiceState, path) -> dict:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict) or payload.get("format") != SNAPSHOT_FORMAT:
        raise ValueError(f"{path}: not an index snapshot")
    if payload.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {payload.get('version')!r}")
    return ingest_entries(state, payload.get("harvests", []))


def _error(status: int, message: str, **extra) -> JSONResponse:
    return JSONResponse({"error": message, **extra}, status_code=status)


def create_app(state: ServiceState | None = None, cors_origins=("*",)) -> FastAPI:
    """Build the API server around a service state (a fresh, not-ready
    state when omitted; flip `state.ready` once an index is loaded)."""
    if state is None:
        state = ServiceState()
    app = FastAPI(title="xlsearch", docs_url=None, redoc_url=None)
    app.state.service = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/stats")
    def stats():
        with state.lock.read():
            payload = state.index.stats()
            payload["harvestCount"] = len(state.harvests)
        payload["uptimeSeconds"] = round(time.monotonic() - state.started, 3)
        return payload

    @app.get("/harvest/{harvest_id:path}")
    def get_harvest(harvest_id: str):
        with state.lock.read():
            h = state.harvests.get(harvest_id)
            if h is None:
                return _error(404, f"no harvest with id {harvest_id!r}")
            return h.to_dict()

    @app.post("/harvests")
    async def post_harvests(request: Request):
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError):
            return _error(400, "request body is not valid JSON")
        if not isinstance(body, dict) or not isinstance(body.get("harvests"), list):
            return _error(400, 'expected {"harvests": [...]}')
        with state.lock.write():
            try:
                counts = ingest_entries(state, body["harvests"])
            except ConflictError as exc:
                return _error(409, str(exc))
            state.ready = True
        return counts

    @app.post("/query")
    async def post_query(request: Request):
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError):
            return _error(400, "request body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "expected a JSON object")
        formula = body.get("formula")
        if not isinstance(formula, str) or not formula.strip():
            return _error(400, "'formula' must be a non-empty string")
        keywords = body.get("keywords", [])
        if not isinstance(keywords, list) or not all(isinstance(k, str) for k in keywords):
            return _error(400, "'keywords' must be a list of strings")
        limit = body.get("limit", DEFAULT_LIMIT)
        if type(limit) is not int or not 1 <= limit <= MAX_LIMIT:
            return _error(400, f"'limit' must be an integer in 1..{MAX_LIMIT}")
        offset = body.get("offset", 0)
        if type(offset) is not int or offset < 0:
            return _error(400, "'offset' must be a nonnegative integer")

        if not state.ready:
            return _error(503, "index not loaded")
        try:
            with state.lock.read():
                return run_query(state, formula, keywords, limit, offset)
        except ParseError as exc:
            return _error(400, str(exc), position=exc.position)

    return app
