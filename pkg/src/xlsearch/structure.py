"""Sheet structure detection: cell classification, functional blocks,
and legends.

A functional block (FB) is a maximal rectangle of formula cells whose
formulas differ only in their references, i.e. they variablize to one
shared term. Legends are the label areas above and to the left of a
block. Classification applies fixed rules in order; the propagation
rules (R5-R8) extend the base formula/letter-ratio heuristic so that
numeric header rows and input columns adjacent to formulas classify
usefully.
"""

from __future__ import annotations

from dataclasses import dataclass

from .formula import ParseError, parse_formula
from .grid import Region, Sheet, col_to_letters
from .terms import SymbolTable, ast_to_term

__all__ = [
    "FB",
    "LEGEND",
    "NUMBER",
    "EMPTY",
    "ClassGrid",
    "FunctionalBlock",
    "LegendRegions",
    "letter_ratio",
    "classify_cells",
    "cp_similar",
    "detect_functional_blocks",
    "detect_legends",
]

FB = "FB"
LEGEND = "Legend"
NUMBER = "Number"
EMPTY = "Empty"


@dataclass
class ClassGrid:
    """Cell class per (row, col) within the sheet bounds; anything
    outside is Empty."""

    classes: dict
    bounds: Region | None

    def at(self, row: int, col: int) -> str:
        return self.classes.get((row, col), EMPTY)


@dataclass(frozen=True)
class FunctionalBlock:
    sheet: str
    region: Region
    term: object
    anchor_formula: str


@dataclass(frozen=True)
class LegendRegions:
    top: Region | None
    left: Region | None


def letter_ratio(text: str) -> float:
    """Unicode letters divided by non-whitespace characters; 0 when blank."""
    non_ws = [ch for ch in text if not ch.isspace()]
    if not non_ws:
        return 0.0
    return sum(ch.isalpha() for ch in non_ws) / len(non_ws)


def classify_cells(sheet: Sheet) -> ClassGrid:
    """Classify every in-bounds cell as FB, Legend, Number, or Empty.

    Rules, in order: formulas are FB (R1); text that is at least 75%
    letters is Legend (R2); other non-empty cells are Number (R3);
    covered cells of a merge take the anchor's class (R4); Number runs
    flanked by FB in their row become FB (R5); Number cells below a
    Legend become Legend (R6); Number runs flanked by FB in their
    column become FB (R7); Number cells right of a Legend become
    Legend (R8).
    """
    bounds = sheet.bounds()
    classes: dict = {}
    if bounds is None:
        return ClassGrid(classes, None)
    rows, cols = bounds.r2, bounds.c2

    for row in range(1, rows + 1):
        for col in range(1, cols + 1):
            cell = sheet.cell(row, col)
            if cell.formula is not None:
                classes[(row, col)] = FB
            elif cell.value.strip() and letter_ratio(cell.value) >= 0.75:
                classes[(row, col)] = LEGEND
            elif cell.value.strip():
                classes[(row, col)] = NUMBER
            else:
                classes[(row, col)] = EMPTY

    # R4: covered merge cells inherit the anchor's class.
    for merge in sheet.merged:
        anchor_class = classes.get((merge.r1, merge.c1), EMPTY)
        for row, col in merge.cells():
            if (row, col) != (merge.r1, merge.c1):
                classes[(row, col)] = anchor_class

    _propagate_fb_runs(classes, rows, cols, by_row=True)   # R5
    _propagate_legend(classes, rows, cols, downward=True)  # R6
    _propagate_fb_runs(classes, rows, cols, by_row=False)  # R7
    _propagate_legend(classes, rows, cols, downward=False)  # R8
    return ClassGrid(classes, bounds)


def _propagate_fb_runs(classes: dict, rows: int, cols: int, by_row: bool):
    """Turn maximal Number runs into FB when either run end touches an
    FB cell along the scan line."""
    lines = range(1, rows + 1) if by_row else range(1, cols + 1)
    length = cols if by_row else rows

    def key(line, i):
        return (line, i) if by_row else (i, line)

    for line in lines:
        i = 1
        while i <= length:
            if classes.get(key(line, i)) != NUMBER:
                i += 1
                continue
            j = i
            while j + 1 <= length and classes.get(key(line, j + 1)) == NUMBER:
                j += 1
            before = classes.get(key(line, i - 1))
            after = classes.get(key(line, j + 1))
            if before == FB or after == FB:
                for k in range(i, j + 1):
                    classes[key(line, k)] = FB
            i = j + 1


def _propagate_legend(classes: dict, rows: int, cols: int, downward: bool):
    """Number cells adjacent to a Legend on the scan side become Legend;
    the sweep direction lets the change cascade."""
    for row in range(1, rows + 1):
        for col in range(1, cols + 1):
            if classes.get((row, col)) != NUMBER:
                continue
            neighbor = (row - 1, col) if downward else (row, col - 1)
            if classes.get(neighbor) == LEGEND:
                classes[(row, col)] = LEGEND


def cp_similar(f1: str, f2: str, table: SymbolTable) -> bool:
    """True iff the formulas differ only in their references."""
    t1 = ast_to_term(parse_formula(f1), table, variablize=True)
    t2 = ast_to_term(parse_formula(f2), table, variablize=True)
    return t1 == t2


def detect_functional_blocks(sheet: Sheet, table: SymbolTable):
    """Find computed functional blocks by greedy rectangulation.

    Scans row-major; each unvisited formula cell seeds a rectangle that
    grows right, then down, while every added cell's variablized term
    equals the seed's. Returns (blocks, diagnostics); cells whose
    formulas do not parse are skipped and reported, never fatal.
    """
    bounds = sheet.bounds()
    blocks: list[FunctionalBlock] = []
    diagnostics: list[dict] = []
    if bounds is None:
        return blocks, diagnostics

    terms: dict = {}
    for (row, col), cell in sheet.cells.items():
        if cell.formula is None:
            continue
        try:
            ast = parse_formula(cell.formula)
            terms[(row, col)] = ast_to_term(ast, table, variablize=True)
        except ParseError as exc:
            diagnostics.append({
                "sheet": sheet.name,
                "cellRef": f"{col_to_letters(col)}{row}",
                "message": str(exc),
            })

    visited: set = set()
    for row in range(1, bounds.r2 + 1):
        for col in range(1, bounds.c2 + 1):
            if (row, col) in visited or (row, col) not in terms:
                continue
            term = terms[(row, col)]
            c2 = col
            while (row, c2 + 1) not in visited and terms.get((row, c2 + 1)) == term:
                c2 += 1
            r2 = row
            while all((r2 + 1, c) not in visited and terms.get((r2 + 1, c)) == term
                      for c in range(col, c2 + 1)):
                r2 += 1
            region = Region(row, col, r2, c2)
            for r, c in region.cells():
                visited.add((r, c))
            blocks.append(FunctionalBlock(
                sheet=sheet.name,
                region=region,
                term=term,
                anchor_formula=sheet.cell(row, col).formula,
            ))
    return blocks, diagnostics


def _scan_legend_side(class_grid: ClassGrid, span: range, start: int,
                      at) -> tuple[int, int] | None:
    """Shared top/left scan. `at(line, k)` reads the class of cell k on
    scan line `line`; lines run from `start` toward 1. Returns the
    (far, near) line pair bounding the legend, or None."""
    s = None
    for line in range(start, 0, -1):
        cells = [at(line, k) for k in span]
        if any(c == FB for c in cells):
            continue
        if any(c == LEGEND for c in cells):
            s = line
            break
    if s is None:
        return None
    t = s
    for line in range(s - 1, 0, -1):
        cells = [at(line, k) for k in span]
        if any(c == FB for c in cells) or all(c == EMPTY for c in cells):
            break
        t = line
    return t, s


def detect_legends(sheet: Sheet, class_grid: ClassGrid, fb: Region) -> LegendRegions:
    """Locate the legend regions of a block.

    Top: scan upward from the row above the block, restricted to the
    block's columns; skip rows that contain an FB cell or no Legend
    cell; the first qualifying row is the near edge, then keep going up
    through non-empty FB-free rows to the far edge. Left: the same,
    transposed.
    """
    top = None
    found = _scan_legend_side(
        class_grid, range(fb.c1, fb.c2 + 1), fb.r1 - 1,
        lambda line, k: class_grid.at(line, k))
    if found:
        top = Region(found[0], fb.c1, found[1], fb.c2)

    left = None
    found = _scan_legend_side(
        class_grid, range(fb.r1, fb.r2 + 1), fb.c1 - 1,
        lambda line, k: class_grid.at(k, line))
    if found:
        left = Region(fb.r1, found[0], fb.r2, found[1])

    return LegendRegions(top=top, left=left)
