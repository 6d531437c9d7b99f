"""xlsearch: a search engine for spreadsheet formulas.

Workbooks are scanned for functional blocks (rectangles of formulas
that differ only in their references), each block is harvested as a
variablized term with keywords and a snippet, and the terms go into a
substitution-tree index that answers unification queries: formulas
written in native syntax with `?name` variables.
"""

from .grid import Workbook, load_grid_json, load_xlsx
from .harvest import harvest_workbook
from .index import SubstitutionIndex, unify
from .structure import detect_functional_blocks, detect_legends
from .terms import ast_to_term, load_symbol_table, term_to_mathml

__version__ = "0.1.0"

__all__ = [
    "Workbook",
    "load_grid_json",
    "load_xlsx",
    "harvest_workbook",
    "SubstitutionIndex",
    "unify",
    "detect_functional_blocks",
    "detect_legends",
    "ast_to_term",
    "load_symbol_table",
    "term_to_mathml",
    "__version__",
]
