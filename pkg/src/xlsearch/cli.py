"""Command-line entry points.

`crawl` turns spreadsheets into a harvest batch file, `serve` runs the
HTTP service over batches or a snapshot, `query` answers one query
(against a running server or locally from batch files), `stats` prints
index counters, and `bench` measures index growth and query latency,
writing CSV tables and figures.
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from .bench import run_benchmark
from .formula import ParseError
from .grid import GridFormatError, load_grid_json, load_xlsx
from .harvest import harvest_workbook, harvests_from_json, write_harvest_batch
from .service import (ConflictError, ServiceState, create_app, ingest_entries,
                      load_snapshot, run_query, save_snapshot)
from .terms import load_symbol_table

_JSON_KWARGS = {"indent": 2, "ensure_ascii": False, "sort_keys": True}


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--symbols", envvar="XLSEARCH_SYMBOLS", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Symbol-table TSV overriding the packaged one.")
@click.option("--dialect", default="excel", show_default=True,
              type=click.Choice(["excel", "openoffice", "generic"]),
              help="Spreadsheet dialect for symbol lookup.")
@click.pass_context
def main(ctx, symbols, dialect):
    """Search engine for spreadsheet formulas.

    Formulas are parsed into operator terms, references are turned into
    variables, and matching is first-order unification, so a query like
    "?fa+(?x-?a)/(?b-?a)*(?fb-?fa)" finds every structurally matching
    formula regardless of where it sits on a sheet.
    """
    ctx.ensure_object(dict)
    ctx.obj["symbols"] = symbols
    ctx.obj["dialect"] = dialect


def _table(ctx):
    return load_symbol_table(ctx.obj["symbols"], ctx.obj["dialect"])


def _load_workbook(path: Path):
    if path.suffix.lower() == ".xlsx":
        return load_xlsx(path.read_bytes(), uri=str(path))
    return load_grid_json(path.read_text(encoding="utf-8"), default_uri=str(path))


def _collect_files(paths, list_file) -> list[str]:
    candidates: list[str] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            found = [q for q in p.rglob("*")
                     if q.is_file() and (q.suffix.lower() == ".xlsx"
                                         or q.name.lower().endswith(".grid.json"))]
            candidates.extend(str(q) for q in found)
        else:
            candidates.append(raw)
    if list_file:
        with open(list_file, encoding="utf-8") as fh:
            candidates.extend(line.strip() for line in fh if line.strip())
    # stable order, duplicates dropped
    return sorted(dict.fromkeys(candidates))


@main.command()
@click.argument("paths", nargs=-1, type=click.Path())
@click.option("--list", "list_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Text file with one spreadsheet path per line.")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Harvest batch file to write.")
@click.pass_context
def crawl(ctx, paths, list_file, out):
    """Harvest spreadsheets (.xlsx or .grid.json) into a batch file.

    Files are processed in sorted-path order so the batch is
    reproducible; the crawl report goes to standard error as JSON.
    """
    table = _table(ctx)
    files = _collect_files(paths, list_file)
    report = {"filesSeen": len(files), "filesParsed": 0,
              "harvestsEmitted": 0, "diagnostics": []}
    harvests = []
    for name in files:
        path = Path(name)
        try:
            workbook = _load_workbook(path)
        except (OSError, GridFormatError) as exc:
            report["diagnostics"].append({"uri": name, "message": str(exc)})
            continue
        report["filesParsed"] += 1
        found, diags = harvest_workbook(workbook, table)
        harvests.extend(found)
        report["diagnostics"].extend({"uri": name, **d} for d in diags)
    report["harvestsEmitted"] = len(harvests)

    if files:
        write_harvest_batch(harvests, out)
    click.echo(json.dumps(report, **_JSON_KWARGS), err=True)
    if not files:
        ctx.exit(2)


def _load_batches_into(state: ServiceState, harvest_files, snapshot=None):
    if snapshot and Path(snapshot).exists():
        try:
            load_snapshot(state, snapshot)
        except (ValueError, ConflictError) as exc:
            raise click.ClickException(f"{snapshot}: {exc}")
    for name in harvest_files:
        try:
            with open(name, encoding="utf-8") as fh:
                batch = harvests_from_json(fh.read())
            ingest_entries(state, [h.to_dict() for h in batch])
        except (ValueError, ConflictError) as exc:
            raise click.ClickException(f"{name}: {exc}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", envvar="XLSEARCH_PORT", default=8080, type=int,
              show_default=True)
@click.option("--snapshot", envvar="XLSEARCH_SNAPSHOT", default=None,
              type=click.Path(dir_okay=False),
              help="Snapshot to load at startup and write on shutdown.")
@click.option("--harvests", "harvest_files", multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Harvest batch file; repeatable.")
@click.option("--cors-origin", "cors_origins", multiple=True, default=("*",),
              show_default=True, help="Allowed CORS origin; repeatable.")
@click.pass_context
def serve(ctx, host, port, snapshot, harvest_files, cors_origins):
    """Run the search service until interrupted."""
    import signal

    import uvicorn

    state = ServiceState(table=_table(ctx))
    _load_batches_into(state, harvest_files, snapshot)
    state.ready = True
    app = create_app(state, cors_origins)
    click.echo(f"serving {len(state.harvests)} harvests on http://{host}:{port}", err=True)

    # uvicorn re-raises the shutdown signal with default handlers restored,
    # which would kill the process before the snapshot gets written.
    def _graceful(signum, frame):
        raise KeyboardInterrupt

    previous = signal.signal(signal.SIGTERM, _graceful)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except KeyboardInterrupt:
        pass
    except (OSError, SystemExit) as exc:
        raise click.ClickException(f"server failed on {host}:{port}: {exc}")
    finally:
        signal.signal(signal.SIGTERM, previous)
    if snapshot:
        save_snapshot(state, snapshot)
        click.echo(f"snapshot written to {snapshot}", err=True)


@main.command()
@click.argument("formula")
@click.option("-k", "--keyword", "keywords", multiple=True,
              help="Keyword filter; repeatable, all must match.")
@click.option("--server", default=None, metavar="URL",
              help="Query a running service instead of local files.")
@click.option("--harvests", "harvest_files", multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Harvest batch for local querying; repeatable.")
@click.option("--limit", default=20, show_default=True)
@click.option("--offset", default=0, show_default=True)
@click.pass_context
def query(ctx, formula, keywords, server, harvest_files, limit, offset):
    """Run one query and print the answer set as JSON.

    Exit status: 0 with hits, 1 with none, 2 on a parse error.
    """
    if server:
        result = _query_server(ctx, server, formula, keywords, limit, offset)
    else:
        if not harvest_files:
            raise click.UsageError("provide --server or at least one --harvests file")
        state = ServiceState(table=_table(ctx))
        _load_batches_into(state, harvest_files)
        try:
            result = run_query(state, formula, list(keywords), limit, offset)
        except ParseError as exc:
            body = {"error": str(exc), "position": exc.position}
            click.echo(json.dumps(body, **_JSON_KWARGS), err=True)
            ctx.exit(2)
    click.echo(json.dumps(result, **_JSON_KWARGS))
    ctx.exit(0 if result["total"] > 0 else 1)


def _query_server(ctx, server, formula, keywords, limit, offset):
    import httpx

    payload = {"formula": formula, "keywords": list(keywords),
               "limit": limit, "offset": offset}
    try:
        resp = httpx.post(server.rstrip("/") + "/query", json=payload, timeout=60.0)
    except httpx.HTTPError as exc:
        raise click.ClickException(f"cannot reach {server}: {exc}")
    if resp.status_code == 400:
        click.echo(json.dumps(resp.json(), **_JSON_KWARGS), err=True)
        ctx.exit(2)
    if resp.status_code != 200:
        raise click.ClickException(f"server returned {resp.status_code}: {resp.text}")
    return resp.json()


@main.command()
@click.option("--server", default=None, metavar="URL")
@click.option("--harvests", "harvest_files", multiple=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--snapshot", default=None, type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def stats(ctx, server, harvest_files, snapshot):
    """Print index and store counters as JSON."""
    if server:
        import httpx
        try:
            resp = httpx.get(server.rstrip("/") + "/stats", timeout=30.0)
        except httpx.HTTPError as exc:
            raise click.ClickException(f"cannot reach {server}: {exc}")
        if resp.status_code != 200:
            raise click.ClickException(f"server returned {resp.status_code}: {resp.text}")
        click.echo(json.dumps(resp.json(), **_JSON_KWARGS))
        return
    state = ServiceState(table=_table(ctx))
    _load_batches_into(state, harvest_files, snapshot)
    payload = state.index.stats()
    payload["harvestCount"] = len(state.harvests)
    click.echo(json.dumps(payload, **_JSON_KWARGS))


@main.command()
@click.option("--out-dir", default="bench-out", show_default=True,
              type=click.Path(file_okay=False),
              help="Directory for CSV tables and figures.")
@click.option("--sizes", default="10000,50000,100000", show_default=True,
              help="Comma-separated index sizes.")
@click.option("--queries", default=100, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.pass_context
def bench(ctx, out_dir, sizes, queries, seed):
    """Benchmark index memory growth and query latency.

    Writes bench_sizes.csv and bench_queries.csv plus fig_memory.png
    and fig_latency.png to the output directory, and prints a summary.
    """
    try:
        size_list = tuple(int(s) for s in sizes.split(",") if s.strip())
    except ValueError:
        raise click.UsageError(f"bad --sizes value: {sizes!r}")
    if not size_list:
        raise click.UsageError("need at least one size")
    summary = run_benchmark(sizes=size_list, query_count=queries, seed=seed,
                            out_dir=out_dir, table=_table(ctx))
    click.echo(json.dumps(summary, **_JSON_KWARGS))


if __name__ == "__main__":
    main()
