"""Shared fixtures: the budget-projection demo workbook in both grid-JSON
and XLSX form, plus symbol tables and the acceptance summary hook."""

import io
import zipfile
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

import pytest

from xlsearch.grid import Region, col_to_letters, load_grid_json
from xlsearch.harvest import harvest_workbook
from xlsearch.terms import load_symbol_table

FIXTURE_PATH = Path(__file__).resolve().parent.parent / "fixtures" / "winograd.grid.json"

# the linear-extrapolation query used across the end-to-end tests
INTERPOLATION_QUERY = "?fa+(?x-?a)/(?b-?a)*(?fb-?fa)"


@pytest.fixture(scope="session")
def fixture_text() -> str:
    return FIXTURE_PATH.read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def winograd(fixture_text):
    return load_grid_json(fixture_text)


@pytest.fixture(scope="session")
def excel_table():
    return load_symbol_table(dialect="excel")


@pytest.fixture(scope="session")
def generic_table():
    return load_symbol_table()


@pytest.fixture(scope="session")
def winograd_harvests(winograd, excel_table):
    harvests, diagnostics = harvest_workbook(winograd, excel_table)
    assert diagnostics == []
    return harvests


# ---------------------------------------------------------------------------
# Minimal OOXML writer. Deliberately independent of the loader under test:
# parts are assembled as strings so the reader is checked against the wire
# format, not against itself.
# ---------------------------------------------------------------------------

_XML_DECL = '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>\n'
_NS_MAIN = "http://schemas.openxmlformats.org/spreadsheetml/2006/main"
_NS_REL_DOC = "http://schemas.openxmlformats.org/officeDocument/2006/relationships"
_NS_REL_PKG = "http://schemas.openxmlformats.org/package/2006/relationships"


def workbook_to_xlsx(workbook, shared_groups=()) -> bytes:
    """Serialize a workbook model to XLSX bytes.

    shared_groups: iterable of (sheet_name, region_a1) marking formula
    runs to emit as OOXML shared-formula groups; the top-left cell of
    each region becomes the group master, the rest carry only `si`.
    """
    strings: list[str] = []
    string_ids: dict[str, int] = {}

    def sst_id(text: str) -> int:
        if text not in string_ids:
            string_ids[text] = len(strings)
            strings.append(text)
        return string_ids[text]

    shared_by_sheet: dict[str, list[Region]] = {}
    for sheet_name, region_a1 in shared_groups:
        shared_by_sheet.setdefault(sheet_name, []).append(Region.from_a1(region_a1))

    sheet_parts = []
    for sheet in workbook.sheets:
        groups = shared_by_sheet.get(sheet.name, [])
        rows = sorted({rc[0] for rc in sheet.cells})
        body = ["<sheetData>"]
        for row in rows:
            body.append(f'<row r="{row}">')
            for (r, c) in sorted(rc for rc in sheet.cells if rc[0] == row):
                cell = sheet.cells[(r, c)]
                ref = f"{col_to_letters(c)}{r}"
                f_xml = ""
                if cell.formula is not None:
                    group = next((i for i, g in enumerate(groups) if g.contains(r, c)), None)
                    if group is None:
                        f_xml = f"<f>{escape(cell.formula)}</f>"
                    elif (r, c) == (groups[group].r1, groups[group].c1):
                        f_xml = (f'<f t="shared" ref="{groups[group].a1()}" '
                                 f'si="{group}">{escape(cell.formula)}</f>')
                    else:
                        f_xml = f'<f t="shared" si="{group}"/>'
                if cell.value_type == "text":
                    body.append(f'<c r="{ref}" t="s">{f_xml}<v>{sst_id(cell.value)}</v></c>')
                elif cell.value_type == "boolean":
                    flag = "1" if cell.value == "TRUE" else "0"
                    body.append(f'<c r="{ref}" t="b">{f_xml}<v>{flag}</v></c>')
                elif cell.value_type == "error":
                    body.append(f'<c r="{ref}" t="e">{f_xml}<v>{escape(cell.value)}</v></c>')
                elif cell.value == "":
                    body.append(f'<c r="{ref}">{f_xml}</c>')
                else:
                    body.append(f'<c r="{ref}">{f_xml}<v>{escape(cell.value)}</v></c>')
            body.append("</row>")
        body.append("</sheetData>")
        if sheet.merged:
            body.append(f'<mergeCells count="{len(sheet.merged)}">')
            body.extend(f'<mergeCell ref="{m.a1()}"/>' for m in sheet.merged)
            body.append("</mergeCells>")
        sheet_parts.append(
            _XML_DECL + f'<worksheet xmlns="{_NS_MAIN}">' + "".join(body) + "</worksheet>"
        )

    sheets_xml = "".join(
        f'<sheet name={quoteattr(s.name)} sheetId="{i}" r:id="rId{i}"/>'
        for i, s in enumerate(workbook.sheets, start=1)
    )
    rels_xml = "".join(
        f'<Relationship Id="rId{i}" Type="{_NS_REL_DOC}/worksheet" '
        f'Target="worksheets/sheet{i}.xml"/>'
        for i in range(1, len(workbook.sheets) + 1)
    )
    sst_xml = "".join(f"<si><t>{escape(t)}</t></si>" for t in strings)

    overrides = "".join(
        f'<Override PartName="/xl/worksheets/sheet{i}.xml" ContentType='
        '"application/vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml"/>'
        for i in range(1, len(workbook.sheets) + 1)
    )
    content_types = (
        _XML_DECL
        + '<Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types">'
        '<Default Extension="rels" '
        'ContentType="application/vnd.openxmlformats-package.relationships+xml"/>'
        '<Default Extension="xml" ContentType="application/xml"/>'
        '<Override PartName="/xl/workbook.xml" ContentType='
        '"application/vnd.openxmlformats-officedocument.spreadsheetml.sheet.main+xml"/>'
        '<Override PartName="/xl/sharedStrings.xml" ContentType='
        '"application/vnd.openxmlformats-officedocument.spreadsheetml.sharedStrings+xml"/>'
        + overrides + "</Types>"
    )

    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("[Content_Types].xml", content_types)
        zf.writestr(
            "_rels/.rels",
            _XML_DECL + f'<Relationships xmlns="{_NS_REL_PKG}">'
            f'<Relationship Id="rId1" Type="{_NS_REL_DOC}/officeDocument" '
            'Target="xl/workbook.xml"/></Relationships>',
        )
        zf.writestr(
            "xl/workbook.xml",
            _XML_DECL + f'<workbook xmlns="{_NS_MAIN}" xmlns:r="{_NS_REL_DOC}">'
            f"<sheets>{sheets_xml}</sheets></workbook>",
        )
        zf.writestr(
            "xl/_rels/workbook.xml.rels",
            _XML_DECL + f'<Relationships xmlns="{_NS_REL_PKG}">{rels_xml}</Relationships>',
        )
        zf.writestr(
            "xl/sharedStrings.xml",
            _XML_DECL + f'<sst xmlns="{_NS_MAIN}" count="{len(strings)}" '
            f'uniqueCount="{len(strings)}">{sst_xml}</sst>',
        )
        for i, part in enumerate(sheet_parts, start=1):
            zf.writestr(f"xl/worksheets/sheet{i}.xml", part)
    return buffer.getvalue()


@pytest.fixture(scope="session")
def winograd_xlsx(winograd) -> bytes:
    # row 13 becomes a shared-formula group to exercise master expansion
    return workbook_to_xlsx(winograd, shared_groups=[("Sheet1", "B13:F13")])


# ---------------------------------------------------------------------------
# Acceptance summary: one PASS/FAIL line per test in test_acceptance.py.
# ---------------------------------------------------------------------------

_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        _acceptance_results[name] = report.outcome
    elif report.when == "setup" and report.outcome != "passed":
        _acceptance_results[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance_results.items():
        word = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"{word}  {name}")
