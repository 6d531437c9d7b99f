"""Harvesting: turn detected functional blocks into index records.

Each harvest carries the block's variablized term (as MathML), its
position, the raw formula of the block's upper-left cell, keywords read
from the legend regions, and a small XHTML snippet of the block with
its legends. Batches serialize to a stable JSON file that the service
ingests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .grid import Region, Sheet, Workbook, col_to_letters
from .structure import (FunctionalBlock, LegendRegions, classify_cells,
                        detect_functional_blocks, detect_legends)
from .terms import SymbolTable, ast_to_term, mathml_to_term, term_to_mathml
from .formula import parse_formula

__all__ = [
    "Harvest",
    "harvest_workbook",
    "extract_keywords",
    "render_snippet",
    "harvests_to_json",
    "harvest_from_dict",
    "harvests_from_json",
    "write_harvest_batch",
    "load_harvest_batch",
]


@dataclass(frozen=True)
class Harvest:
    id: str
    uri: str
    sheet: str
    region: Region
    term: object
    mathml: str
    raw_formula: str
    keywords: tuple
    snippet: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "uri": self.uri,
            "sheet": self.sheet,
            "region": self.region.a1(),
            "mathml": self.mathml,
            "rawFormula": self.raw_formula,
            "keywords": list(self.keywords),
            "snippet": self.snippet,
        }


def _display_value(sheet: Sheet, row: int, col: int) -> str:
    """Cell display text; covered merge cells resolve to their anchor."""
    merge = sheet.merge_at(row, col)
    if merge and (row, col) != (merge.r1, merge.c1):
        row, col = merge.r1, merge.c1
    return sheet.cell(row, col).value


def extract_keywords(sheet: Sheet, legends: LegendRegions) -> list[str]:
    """Legend cell texts: top region in reading order, then left region
    top-to-bottom; trimmed, deduplicated keeping the first occurrence."""
    seen = set()
    keywords: list[str] = []

    def take(row: int, col: int):
        text = _display_value(sheet, row, col).strip()
        if text and text not in seen:
            seen.add(text)
            keywords.append(text)

    if legends.top:
        for row, col in legends.top.cells():
            take(row, col)
    if legends.left:
        region = legends.left
        for col in range(region.c1, region.c2 + 1):
            for row in range(region.r1, region.r2 + 1):
                take(row, col)
    return keywords


def render_snippet(sheet: Sheet, fb: Region, legends: LegendRegions) -> str:
    """Render the block plus legends as an XHTML table.

    Merged cells that stick out of a legend region have their content
    moved to the top-left cell of the overlap, then all merge structure
    is dropped. Only rows and columns touching the block or a legend
    are kept; the first row and column hold the surviving column
    letters and row numbers.
    """
    regions = [fb] + [r for r in (legends.top, legends.left) if r]

    moved: dict = {}
    cleared: set = set()
    for legend in regions[1:]:
        for merge in sheet.merged:
            overlap = merge.intersection(legend)
            if overlap is None:
                continue
            if (merge.r1 >= legend.r1 and merge.r2 <= legend.r2
                    and merge.c1 >= legend.c1 and merge.c2 <= legend.c2):
                continue  # fully inside: content stays at its anchor
            anchor = (merge.r1, merge.c1)
            target = (overlap.r1, overlap.c1)
            if target != anchor:
                moved[target] = sheet.cell(*anchor).value
                cleared.add(anchor)

    def shown(row: int, col: int) -> str:
        if (row, col) in moved:
            return moved[(row, col)]
        if (row, col) in cleared:
            return ""
        return sheet.cell(row, col).value

    rows = sorted({r for reg in regions for r in range(reg.r1, reg.r2 + 1)})
    cols = sorted({c for reg in regions for c in range(reg.c1, reg.c2 + 1)})

    parts = ["<table>", "<thead><tr><th></th>"]
    for col in cols:
        parts.append(f"<th>{escape(col_to_letters(col))}</th>")
    parts.append("</tr></thead>")
    parts.append("<tbody>")
    for row in rows:
        parts.append(f"<tr><th>{row}</th>")
        for col in cols:
            parts.append(f"<td>{escape(shown(row, col))}</td>")
        parts.append("</tr>")
    parts.append("</tbody>")
    parts.append("</table>")
    return "".join(parts)


def harvest_workbook(workbook: Workbook, table: SymbolTable):
    """Harvest every computed functional block of every sheet.

    Returns (harvests, diagnostics); harvests are ordered by sheet,
    then block position row-major.
    """
    harvests: list[Harvest] = []
    diagnostics: list[dict] = []
    for sheet in workbook.sheets:
        class_grid = classify_cells(sheet)
        blocks, diags = detect_functional_blocks(sheet, table)
        diagnostics.extend(diags)
        blocks = sorted(blocks, key=lambda b: (b.region.r1, b.region.c1))
        for block in blocks:
            legends = detect_legends(sheet, class_grid, block.region)
            region_a1 = block.region.a1()
            harvests.append(Harvest(
                id=f"{workbook.uri}#{sheet.name}!{region_a1}",
                uri=workbook.uri,
                sheet=sheet.name,
                region=block.region,
                term=block.term,
                mathml=term_to_mathml(block.term),
                raw_formula=block.anchor_formula,
                keywords=tuple(extract_keywords(sheet, legends)),
                snippet=render_snippet(sheet, block.region, legends),
            ))
    return harvests, diagnostics


def harvests_to_json(harvests) -> str:
    """Stable batch serialization: sorted keys, two-space indent,
    trailing newline."""
    payload = {"harvests": [h.to_dict() for h in harvests]}
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def harvest_from_dict(entry: dict) -> Harvest:
    for field in ("id", "uri", "sheet", "region", "mathml", "rawFormula",
                  "keywords", "snippet"):
        if field not in entry:
            raise ValueError(f"harvest entry missing field {field!r}")
    term = mathml_to_term(entry["mathml"])
    keywords = entry["keywords"]
    if not isinstance(keywords, list) or not all(isinstance(k, str) for k in keywords):
        raise ValueError("harvest keywords must be a list of strings")
    return Harvest(
        id=entry["id"],
        uri=entry["uri"],
        sheet=entry["sheet"],
        region=Region.from_a1(entry["region"]),
        term=term,
        mathml=entry["mathml"],
        raw_formula=entry["rawFormula"],
        keywords=tuple(keywords),
        snippet=entry["snippet"],
    )


def harvests_from_json(text: str) -> list[Harvest]:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"bad harvest batch: {exc}") from None
    if not isinstance(payload, dict) or not isinstance(payload.get("harvests"), list):
        raise ValueError('harvest batch must be {"harvests": [...]}')
    return [harvest_from_dict(e) for e in payload["harvests"]]


def write_harvest_batch(harvests, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(harvests_to_json(harvests))


def load_harvest_batch(path) -> list[Harvest]:
    with open(path, encoding="utf-8") as fh:
        return harvests_from_json(fh.read())


def harvest_from_formula(uri: str, sheet: str, region: Region, formula: str,
                         table: SymbolTable, keywords=(), snippet="") -> Harvest:
    """Build a harvest directly from a formula string; used by tests and
    synthetic corpora."""
    term = ast_to_term(parse_formula(formula), table, variablize=True)
    return Harvest(
        id=f"{uri}#{sheet}!{region.a1()}",
        uri=uri,
        sheet=sheet,
        region=region,
        term=term,
        mathml=term_to_mathml(term),
        raw_formula=formula,
        keywords=tuple(keywords),
        snippet=snippet,
    )
