"""In-memory workbook grid model and loaders.

Two sources feed the same model: a JSON grid format (the interchange and
test-fixture format) and XLSX archives read directly from the OOXML parts.
Loaded workbooks are immutable value objects; nothing here evaluates
formulas, cached display values are taken verbatim from the file.
"""

from __future__ import annotations

import io
import json
import posixpath
import re
import zipfile
from dataclasses import dataclass, field
from xml.etree import ElementTree as ET

__all__ = [
    "CellAddr",
    "Region",
    "Cell",
    "Sheet",
    "Workbook",
    "GridFormatError",
    "col_to_letters",
    "letters_to_col",
    "load_grid_json",
    "dump_grid_json",
    "load_xlsx",
    "expand_shared_formula",
]

VALUE_TYPES = ("number", "text", "boolean", "error", "empty")

_NUMERIC_LEXEME = re.compile(r"-?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_PLAIN_REF = re.compile(r"([A-Za-z]+)([0-9]+)$")


class GridFormatError(ValueError):
    """Raised for malformed grid JSON or XLSX input."""


def col_to_letters(col: int) -> str:
    """Column index to letters, bijective base 26 (1 -> A, 27 -> AA)."""
    if col < 1:
        raise ValueError(f"column index must be >= 1, got {col}")
    letters = ""
    while col:
        col, rem = divmod(col - 1, 26)
        letters = chr(ord("A") + rem) + letters
    return letters


def letters_to_col(letters: str) -> int:
    """Column letters to index (A -> 1, Z -> 26, AA -> 27)."""
    if not letters or not letters.isalpha():
        raise ValueError(f"bad column letters: {letters!r}")
    col = 0
    for ch in letters.upper():
        col = col * 26 + (ord(ch) - ord("A") + 1)
    return col


@dataclass(frozen=True)
class CellAddr:
    """A 1-based cell coordinate, optionally sheet-qualified and anchored."""

    col: int
    row: int
    sheet: str | None = None
    col_abs: bool = False
    row_abs: bool = False

    def __post_init__(self):
        if self.col < 1 or self.row < 1:
            raise ValueError(f"cell coordinates must be >= 1, got col={self.col} row={self.row}")

    def a1(self) -> str:
        """Render in A1 notation, including $ anchors and sheet prefix."""
        text = ""
        if self.sheet is not None:
            if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.]*", self.sheet):
                text = self.sheet + "!"
            else:
                text = "'" + self.sheet.replace("'", "''") + "'!"
        if self.col_abs:
            text += "$"
        text += col_to_letters(self.col)
        if self.row_abs:
            text += "$"
        return text + str(self.row)

    def shifted(self, d_row: int, d_col: int) -> "CellAddr":
        """Shift the relative components; absolute components stay put."""
        row = self.row if self.row_abs else self.row + d_row
        col = self.col if self.col_abs else self.col + d_col
        if row < 1 or col < 1:
            raise ValueError(f"shift moves {self.a1()} off the grid")
        return CellAddr(col, row, self.sheet, self.col_abs, self.row_abs)


@dataclass(frozen=True)
class Region:
    """Inclusive rectangle of 1-based rows r1..r2 and columns c1..c2."""

    r1: int
    c1: int
    r2: int
    c2: int

    def __post_init__(self):
        if not (1 <= self.r1 <= self.r2 and 1 <= self.c1 <= self.c2):
            raise ValueError(f"bad region bounds {self}")

    @classmethod
    def from_a1(cls, text: str) -> "Region":
        """Parse an `A1:B2` range string (single-cell `A1` also accepted)."""
        parts = text.split(":")
        if len(parts) == 1:
            parts = [text, text]
        if len(parts) != 2:
            raise GridFormatError(f"bad range: {text!r}")
        (c1, r1), (c2, r2) = (_parse_plain_ref(p) for p in parts)
        if r2 < r1 or c2 < c1:
            raise GridFormatError(f"inverted range: {text!r}")
        return cls(r1, c1, r2, c2)

    def a1(self) -> str:
        return f"{col_to_letters(self.c1)}{self.r1}:{col_to_letters(self.c2)}{self.r2}"

    def contains(self, row: int, col: int) -> bool:
        return self.r1 <= row <= self.r2 and self.c1 <= col <= self.c2

    def intersects(self, other: "Region") -> bool:
        return not (
            other.r2 < self.r1 or self.r2 < other.r1 or other.c2 < self.c1 or self.c2 < other.c1
        )

    def intersection(self, other: "Region") -> "Region | None":
        if not self.intersects(other):
            return None
        return Region(
            max(self.r1, other.r1),
            max(self.c1, other.c1),
            min(self.r2, other.r2),
            min(self.c2, other.c2),
        )

    def cells(self):
        for row in range(self.r1, self.r2 + 1):
            for col in range(self.c1, self.c2 + 1):
                yield row, col

    @property
    def rows(self) -> range:
        return range(self.r1, self.r2 + 1)

    @property
    def cols(self) -> range:
        return range(self.c1, self.c2 + 1)


@dataclass(frozen=True)
class Cell:
    """One grid cell: optional formula text (no leading '='), cached value."""

    addr: CellAddr
    formula: str | None = None
    value: str = ""
    value_type: str = "empty"

    def __post_init__(self):
        if self.value_type not in VALUE_TYPES:
            raise ValueError(f"bad valueType {self.value_type!r}")

    @property
    def is_empty(self) -> bool:
        return self.formula is None and self.value == ""


@dataclass
class Sheet:
    """A named sheet: sparse cell map keyed by (row, col) plus merge list."""

    name: str
    cells: dict[tuple[int, int], Cell] = field(default_factory=dict)
    merged: list[Region] = field(default_factory=list)

    def cell(self, row: int, col: int) -> Cell:
        """Total lookup: absent coordinates read as an empty cell."""
        hit = self.cells.get((row, col))
        if hit is None:
            return Cell(addr=CellAddr(col=col, row=row))
        return hit

    def merge_at(self, row: int, col: int) -> Region | None:
        for region in self.merged:
            if region.contains(row, col):
                return region
        return None

    def is_covered(self, row: int, col: int) -> bool:
        """True for a merged-region member other than its top-left anchor."""
        region = self.merge_at(row, col)
        return region is not None and (row, col) != (region.r1, region.c1)

    def bounds(self) -> Region | None:
        """Smallest region containing all cells and merges, or None if blank."""
        rows = [rc[0] for rc in self.cells] + [m.r2 for m in self.merged]
        cols = [rc[1] for rc in self.cells] + [m.c2 for m in self.merged]
        if not rows:
            return None
        return Region(1, 1, max(rows), max(cols))


@dataclass
class Workbook:
    uri: str
    sheets: list[Sheet] = field(default_factory=list)

    def sheet(self, name: str) -> Sheet | None:
        for sheet in self.sheets:
            if sheet.name == name:
                return sheet
        return None


def _parse_plain_ref(text: str) -> tuple[int, int]:
    """Parse a bare `A1` position (no sheet, no anchors) to (col, row)."""
    m = _PLAIN_REF.fullmatch(text.strip())
    if not m:
        raise GridFormatError(f"bad cell ref: {text!r}")
    row = int(m.group(2))
    if row < 1:
        raise GridFormatError(f"bad cell ref: {text!r}")
    return letters_to_col(m.group(1)), row


def _infer_value_type(value: str, has_formula: bool) -> str:
    if value == "":
        return "number" if has_formula else "empty"
    return "number" if _NUMERIC_LEXEME.fullmatch(value) else "text"


def _make_cell(row, col, formula, value, value_type) -> Cell:
    if formula is not None:
        formula = formula.removeprefix("=").strip() or None
    if value_type is None:
        value_type = _infer_value_type(value, formula is not None)
    elif value_type not in VALUE_TYPES or value_type == "empty":
        raise GridFormatError(f"bad valueType {value_type!r}")
    if formula is None and value == "":
        value_type = "empty"
    return Cell(CellAddr(col, row), formula, value, value_type)


def _check_merges(sheet: Sheet):
    for i, a in enumerate(sheet.merged):
        for b in sheet.merged[i + 1:]:
            if a.intersects(b):
                raise GridFormatError(
                    f"overlapping merges {a.a1()} and {b.a1()} in sheet {sheet.name!r}"
                )
    # The model keeps covered cells empty; only the anchor carries content.
    for region in sheet.merged:
        for row, col in region.cells():
            if (row, col) != (region.r1, region.c1):
                sheet.cells.pop((row, col), None)


def load_grid_json(data: bytes | str, default_uri: str = "") -> Workbook:
    """Load a workbook from grid JSON (see the schema in the README)."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise GridFormatError(f"malformed grid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("sheets", []), list):
        raise GridFormatError("grid JSON must be an object with a 'sheets' array")
    workbook = Workbook(uri=str(doc.get("uri", default_uri)))
    seen_names = set()
    for sheet_doc in doc.get("sheets", []):
        name = sheet_doc.get("name")
        if not isinstance(name, str) or not name:
            raise GridFormatError("sheet without a name")
        if name in seen_names:
            raise GridFormatError(f"duplicate sheet name {name!r}")
        seen_names.add(name)
        sheet = Sheet(name=name)
        for rec in sheet_doc.get("cells", []):
            col, row = _parse_plain_ref(str(rec.get("ref", "")))
            if (row, col) in sheet.cells:
                raise GridFormatError(f"duplicate cell ref {rec['ref']!r} in sheet {name!r}")
            cell = _make_cell(row, col, rec.get("formula"), str(rec.get("value", "")),
                              rec.get("valueType"))
            if not cell.is_empty:
                sheet.cells[(row, col)] = cell
        for merge_text in sheet_doc.get("merged", []):
            sheet.merged.append(Region.from_a1(str(merge_text)))
        _check_merges(sheet)
        workbook.sheets.append(sheet)
    return workbook


def dump_grid_json(workbook: Workbook) -> bytes:
    """Serialize back to grid JSON; loading the result reproduces the model."""
    doc = {"uri": workbook.uri, "sheets": []}
    for sheet in workbook.sheets:
        cells = []
        for (row, col) in sorted(sheet.cells):
            cell = sheet.cells[(row, col)]
            rec = {"ref": f"{col_to_letters(col)}{row}"}
            if cell.formula is not None:
                rec["formula"] = cell.formula
            if cell.value != "":
                rec["value"] = cell.value
            if cell.value_type != "empty":
                rec["valueType"] = cell.value_type
            cells.append(rec)
        doc["sheets"].append({
            "name": sheet.name,
            "cells": cells,
            "merged": [m.a1() for m in sheet.merged],
        })
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def expand_shared_formula(master_text: str, master_addr: CellAddr, target_addr: CellAddr) -> str:
    """Re-anchor a shared formula from its master cell to a target cell.

    Relative references shift by the (row, col) delta between the two
    anchors; absolute components and every other token are preserved
    byte for byte.
    """
    from .formula import shift_references  # deferred: formula imports grid

    return shift_references(
        master_text,
        d_row=target_addr.row - master_addr.row,
        d_col=target_addr.col - master_addr.col,
    )


# ---------------------------------------------------------------------------
# XLSX ingestion
# ---------------------------------------------------------------------------

_NS_MAIN = "{http://schemas.openxmlformats.org/spreadsheetml/2006/main}"
_NS_REL = "{http://schemas.openxmlformats.org/officeDocument/2006/relationships}"
_NS_PKGREL = "{http://schemas.openxmlformats.org/package/2006/relationships}"


def load_xlsx(data: bytes, uri: str = "") -> Workbook:
    """Load a workbook from XLSX bytes (cells, formulas, shared strings, merges)."""
    try:
        archive = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile as exc:
        raise GridFormatError(f"not a ZIP archive: {exc}") from exc
    names = set(archive.namelist())
    if "xl/workbook.xml" not in names:
        raise GridFormatError("missing xl/workbook.xml part")

    def read_xml(part: str) -> ET.Element:
        try:
            return ET.fromstring(archive.read(part))
        except ET.ParseError as exc:
            raise GridFormatError(f"malformed XML in {part}: {exc}") from exc

    rels = {}
    if "xl/_rels/workbook.xml.rels" in names:
        for rel in read_xml("xl/_rels/workbook.xml.rels"):
            rels[rel.get("Id")] = rel.get("Target", "")

    shared_strings = []
    if "xl/sharedStrings.xml" in names:
        for si in read_xml("xl/sharedStrings.xml"):
            shared_strings.append("".join(t.text or "" for t in si.iter(f"{_NS_MAIN}t")))

    workbook = Workbook(uri=uri)
    wb_root = read_xml("xl/workbook.xml")
    sheets_el = wb_root.find(f"{_NS_MAIN}sheets")
    if sheets_el is None:
        raise GridFormatError("workbook has no sheets element")
    for index, sheet_el in enumerate(sheets_el, start=1):
        name = sheet_el.get("name", f"Sheet{index}")
        rel_id = sheet_el.get(f"{_NS_REL}id")
        target = rels.get(rel_id, f"worksheets/sheet{index}.xml")
        part = target.lstrip("/")
        if not part.startswith("xl/"):
            part = posixpath.normpath(posixpath.join("xl", part))
        if part not in names:
            raise GridFormatError(f"missing worksheet part {part!r}")
        sheet = _load_worksheet(read_xml(part), name, shared_strings)
        workbook.sheets.append(sheet)
    return workbook


def _cell_text(c_el) -> str:
    v_el = c_el.find(f"{_NS_MAIN}v")
    if v_el is not None:
        return v_el.text or ""
    is_el = c_el.find(f"{_NS_MAIN}is")
    if is_el is not None:
        return "".join(t.text or "" for t in is_el.iter(f"{_NS_MAIN}t"))
    return ""


def _load_worksheet(root: ET.Element, name: str, shared_strings: list[str]) -> Sheet:
    sheet = Sheet(name=name)
    shared_masters: dict[str, tuple[str, CellAddr]] = {}
    for c_el in root.iter(f"{_NS_MAIN}c"):
        ref = c_el.get("r")
        if not ref:
            continue
        col, row = _parse_plain_ref(ref)
        cell_type = c_el.get("t", "n")
        raw = _cell_text(c_el)

        formula = None
        f_el = c_el.find(f"{_NS_MAIN}f")
        if f_el is not None:
            if f_el.get("t") == "shared":
                group = f_el.get("si", "")
                if f_el.text:
                    shared_masters[group] = (f_el.text, CellAddr(col, row))
                    formula = f_el.text
                elif group in shared_masters:
                    master_text, master_addr = shared_masters[group]
                    formula = expand_shared_formula(master_text, master_addr, CellAddr(col, row))
                else:
                    raise GridFormatError(
                        f"shared formula in {ref} references undeclared group {group!r}"
                    )
            else:
                formula = f_el.text or ""

        if cell_type == "s":
            try:
                value = shared_strings[int(raw)]
            except (ValueError, IndexError) as exc:
                raise GridFormatError(f"bad shared-string index {raw!r} in {ref}") from exc
            value_type = "text"
        elif cell_type in ("str", "inlineStr"):
            value, value_type = raw, "text"
        elif cell_type == "b":
            value = "TRUE" if raw not in ("0", "") else "FALSE"
            value_type = "boolean"
        elif cell_type == "e":
            value, value_type = raw, "error"
        else:
            value = raw
            value_type = "number" if raw != "" else None

        cell = _make_cell(row, col, formula, value, value_type)
        if not cell.is_empty:
            if (row, col) in sheet.cells:
                raise GridFormatError(f"duplicate cell ref {ref!r} in sheet {name!r}")
            sheet.cells[(row, col)] = cell

    merge_parent = root.find(f"{_NS_MAIN}mergeCells")
    if merge_parent is not None:
        for merge_el in merge_parent:
            sheet.merged.append(Region.from_a1(merge_el.get("ref", "")))
    _check_merges(sheet)
    return sheet
