"""Grid model, grid-JSON loader, and the XLSX reader."""

import json
import zipfile

import pytest
from hypothesis import given
from hypothesis import strategies as st

from xlsearch.grid import (
    Cell,
    CellAddr,
    GridFormatError,
    Region,
    Sheet,
    col_to_letters,
    dump_grid_json,
    expand_shared_formula,
    letters_to_col,
    load_grid_json,
    load_xlsx,
)

from conftest import workbook_to_xlsx


@given(st.integers(min_value=1, max_value=3_000_000))
def test_column_letters_round_trip(col):
    assert letters_to_col(col_to_letters(col)) == col


def test_column_letter_edges():
    assert col_to_letters(1) == "A"
    assert col_to_letters(26) == "Z"
    assert col_to_letters(27) == "AA"
    assert col_to_letters(702) == "ZZ"
    assert col_to_letters(703) == "AAA"
    assert letters_to_col("xfd") == 16384
    with pytest.raises(ValueError):
        col_to_letters(0)
    with pytest.raises(ValueError):
        letters_to_col("A1")


def test_addr_rendering():
    assert CellAddr(2, 7).a1() == "B7"
    assert CellAddr(2, 7, col_abs=True).a1() == "$B7"
    assert CellAddr(2, 7, row_abs=True).a1() == "B$7"
    assert CellAddr(2, 7, "Data").a1() == "Data!B7"
    assert CellAddr(2, 7, "My Sheet").a1() == "'My Sheet'!B7"
    assert CellAddr(2, 7, "it's").a1() == "'it''s'!B7"
    with pytest.raises(ValueError):
        CellAddr(0, 1)


def test_addr_shift_respects_anchors():
    addr = CellAddr(3, 5, col_abs=True)
    moved = addr.shifted(2, 2)
    assert (moved.col, moved.row) == (3, 7)
    assert CellAddr(3, 5, row_abs=True).shifted(2, 2).row == 5
    with pytest.raises(ValueError):
        CellAddr(1, 1).shifted(-1, 0)


def test_region_parse_and_render():
    region = Region.from_a1("B2:D9")
    assert (region.r1, region.c1, region.r2, region.c2) == (2, 2, 9, 4)
    assert region.a1() == "B2:D9"
    assert Region.from_a1("C3") == Region(3, 3, 3, 3)
    assert region.contains(2, 4) and not region.contains(1, 4)
    for bad in ("B2:A1", "B0", "1B", "A1:B2:C3"):
        with pytest.raises(GridFormatError):
            Region.from_a1(bad)


def test_region_intersection():
    a = Region.from_a1("B2:E5")
    assert a.intersection(Region.from_a1("D4:G9")) == Region.from_a1("D4:E5")
    assert a.intersection(Region.from_a1("F6:G9")) is None
    assert list(Region.from_a1("A1:B2").cells()) == [(1, 1), (1, 2), (2, 1), (2, 2)]


@given(st.integers(1, 30), st.integers(1, 30), st.integers(0, 5), st.integers(0, 5))
def test_region_a1_round_trip(r1, c1, dr, dc):
    region = Region(r1, c1, r1 + dr, c1 + dc)
    assert Region.from_a1(region.a1()) == region


def test_sheet_cell_lookup_is_total():
    sheet = Sheet(name="S")
    sheet.cells[(2, 2)] = Cell(CellAddr(2, 2), value="5", value_type="number")
    assert sheet.cell(2, 2).value == "5"
    blank = sheet.cell(99, 99)
    assert blank.is_empty and blank.value_type == "empty"


def test_sheet_merge_queries():
    sheet = Sheet(name="S", merged=[Region.from_a1("B1:C2")])
    assert sheet.merge_at(1, 3) == Region.from_a1("B1:C2")
    assert sheet.merge_at(3, 3) is None
    assert not sheet.is_covered(1, 2)  # anchor
    assert sheet.is_covered(2, 3)
    # bounds must include merge tails even with no cell content there
    assert sheet.bounds() == Region(1, 1, 2, 3)
    assert Sheet(name="T").bounds() is None


def test_grid_json_fixture_is_canonical(fixture_text, winograd):
    # the checked-in fixture is its own dump; guards hand edits drifting
    assert dump_grid_json(winograd) == fixture_text.encode("utf-8")
    assert winograd.uri == "fixtures/winograd.grid.json"
    assert [s.name for s in winograd.sheets] == ["Sheet1"]


def test_grid_json_round_trip(winograd):
    again = load_grid_json(dump_grid_json(winograd))
    assert again == winograd


def test_grid_json_value_type_inference():
    wb = load_grid_json(json.dumps({
        "sheets": [{"name": "S", "cells": [
            {"ref": "A1", "value": "12.5"},
            {"ref": "A2", "value": "1e3"},
            {"ref": "A3", "value": "hello"},
            {"ref": "A4", "formula": "=B1+1"},
            {"ref": "A5", "value": ""},
        ]}],
    }))
    sheet = wb.sheets[0]
    assert sheet.cell(1, 1).value_type == "number"
    assert sheet.cell(2, 1).value_type == "number"
    assert sheet.cell(3, 1).value_type == "text"
    assert sheet.cell(4, 1).formula == "B1+1"  # leading '=' stripped
    assert sheet.cell(4, 1).value_type == "number"
    assert (5, 1) not in sheet.cells  # fully empty records are dropped


@pytest.mark.parametrize("doc,msg", [
    ({"sheets": [{"cells": []}]}, "name"),
    ({"sheets": [{"name": "S"}, {"name": "S"}]}, "duplicate sheet"),
    ({"sheets": [{"name": "S", "cells": [{"ref": "zzz"}]}]}, "cell ref"),
    ({"sheets": [{"name": "S", "cells": [
        {"ref": "A1", "value": "1"}, {"ref": "A1", "value": "2"}]}]}, "duplicate cell"),
    ({"sheets": [{"name": "S", "cells": [
        {"ref": "A1", "value": "x", "valueType": "fancy"}]}]}, "valueType"),
    ({"sheets": [{"name": "S", "cells": [],
                  "merged": ["A1:B2", "B2:C3"]}]}, "overlapping"),
])
def test_grid_json_rejects_malformed(doc, msg):
    with pytest.raises(GridFormatError, match=msg):
        load_grid_json(json.dumps(doc))


def test_grid_json_not_json():
    with pytest.raises(GridFormatError):
        load_grid_json("{nope")
    with pytest.raises(GridFormatError):
        load_grid_json("[1,2]")


def test_covered_cells_lose_content():
    wb = load_grid_json(json.dumps({
        "sheets": [{"name": "S",
                    "cells": [{"ref": "A1", "value": "anchor"},
                              {"ref": "B1", "value": "ghost"}],
                    "merged": ["A1:B1"]}],
    }))
    sheet = wb.sheets[0]
    assert sheet.cell(1, 1).value == "anchor"
    assert sheet.cell(1, 2).is_empty


def test_expand_shared_formula():
    out = expand_shared_formula("SUM(B7:B11)+$A$1", CellAddr(2, 13), CellAddr(4, 13))
    assert out == "SUM(D7:D11)+$A$1"
    out = expand_shared_formula("A1*2", CellAddr(1, 1), CellAddr(1, 3))
    assert out == "A3*2"


# --- XLSX ------------------------------------------------------------------


def test_xlsx_matches_grid_json_model(winograd, winograd_xlsx):
    wb = load_xlsx(winograd_xlsx, uri=winograd.uri)
    assert wb == winograd


def test_xlsx_expands_shared_formulas(winograd_xlsx):
    wb = load_xlsx(winograd_xlsx)
    sheet = wb.sheets[0]
    # only B13 carries text in the file; the rest reanchor from the master
    assert sheet.cell(13, 3).formula == "SUM(C7:C11)"
    assert sheet.cell(13, 6).formula == "SUM(F7:F11)"


def test_xlsx_cell_types():
    raw = workbook_to_xlsx(load_grid_json(json.dumps({
        "sheets": [{"name": "S", "cells": [
            {"ref": "A1", "value": "word", "valueType": "text"},
            {"ref": "A2", "value": "3.5"},
            {"ref": "A3", "value": "TRUE", "valueType": "boolean"},
            {"ref": "A4", "value": "FALSE", "valueType": "boolean"},
            {"ref": "A5", "value": "#DIV/0!", "valueType": "error"},
        ]}],
    })))
    sheet = load_xlsx(raw).sheets[0]
    assert (sheet.cell(1, 1).value, sheet.cell(1, 1).value_type) == ("word", "text")
    assert (sheet.cell(2, 1).value, sheet.cell(2, 1).value_type) == ("3.5", "number")
    assert (sheet.cell(3, 1).value, sheet.cell(3, 1).value_type) == ("TRUE", "boolean")
    assert sheet.cell(4, 1).value == "FALSE"
    assert (sheet.cell(5, 1).value, sheet.cell(5, 1).value_type) == ("#DIV/0!", "error")


def test_xlsx_inline_and_cached_strings():
    # hand-built worksheet exercising t="str" and t="inlineStr"
    ns = "http://schemas.openxmlformats.org/spreadsheetml/2006/main"
    sheet_xml = (
        f'<worksheet xmlns="{ns}"><sheetData><row r="1">'
        '<c r="A1" t="str"><f>CONCAT("a","b")</f><v>ab</v></c>'
        '<c r="B1" t="inlineStr"><is><t>in</t><t>line</t></is></c>'
        "</row></sheetData></worksheet>"
    )
    base = load_grid_json(json.dumps({"sheets": [{"name": "S", "cells": []}]}))
    raw = workbook_to_xlsx(base)
    import io
    buf = io.BytesIO()
    with zipfile.ZipFile(io.BytesIO(raw)) as src, zipfile.ZipFile(buf, "w") as dst:
        for name in src.namelist():
            data = sheet_xml if name == "xl/worksheets/sheet1.xml" else src.read(name)
            dst.writestr(name, data)
    sheet = load_xlsx(buf.getvalue()).sheets[0]
    assert sheet.cell(1, 1).formula == 'CONCAT("a","b")'
    assert (sheet.cell(1, 1).value, sheet.cell(1, 1).value_type) == ("ab", "text")
    assert (sheet.cell(1, 2).value, sheet.cell(1, 2).value_type) == ("inline", "text")


def test_xlsx_rejects_garbage():
    with pytest.raises(GridFormatError, match="ZIP"):
        load_xlsx(b"not an archive")
    import io
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("hello.txt", "hi")
    with pytest.raises(GridFormatError, match="workbook"):
        load_xlsx(buf.getvalue())


def test_xlsx_rejects_undeclared_shared_group():
    ns = "http://schemas.openxmlformats.org/spreadsheetml/2006/main"
    sheet_xml = (
        f'<worksheet xmlns="{ns}"><sheetData><row r="1">'
        '<c r="A1"><f t="shared" si="9"/><v>1</v></c>'
        "</row></sheetData></worksheet>"
    )
    base = load_grid_json(json.dumps({"sheets": [{"name": "S", "cells": []}]}))
    raw = workbook_to_xlsx(base)
    import io
    buf = io.BytesIO()
    with zipfile.ZipFile(io.BytesIO(raw)) as src, zipfile.ZipFile(buf, "w") as dst:
        for name in src.namelist():
            data = sheet_xml if name == "xl/worksheets/sheet1.xml" else src.read(name)
            dst.writestr(name, data)
    with pytest.raises(GridFormatError, match="shared formula"):
        load_xlsx(buf.getvalue())
