"""The 8-cell grid underlying an augmented trial.

Every patient lands in exactly one cell of the cross
(eligibility class) x (treatment conditions) x (treatment arm).
All estimands are linear contrasts over these cells, so a single fixed
ordering is shared by the whole package.
"""

from __future__ import annotations

from typing import NamedTuple


class Cell(NamedTuple):
    """One cell of the design grid; all fields are 1/0 indicators."""

    eligible: int    # 1 = RCT-eligible, 0 = broader population
    conditions: int  # 1 = RCT conditions, 0 = close-to-real-world conditions
    treatment: int   # 1 = experimental arm, 0 = control arm

    @property
    def label(self) -> str:
        return "_".join((
            "eligible" if self.eligible else "broader",
            "rct" if self.conditions else "crw",
            "treated" if self.treatment else "control",
        ))


#: Canonical cell order: index = (1-eligible)*4 + (1-conditions)*2 + (1-treatment)
CELLS: tuple[Cell, ...] = tuple(
    Cell(e, p, t) for e in (1, 0) for p in (1, 0) for t in (1, 0)
)

N_CELLS = len(CELLS)

CELL_LABELS: tuple[str, ...] = tuple(c.label for c in CELLS)

_INDEX = {c: i for i, c in enumerate(CELLS)}
_LABEL_INDEX = {c.label: i for i, c in enumerate(CELLS)}


def cell_index(eligible: int, conditions: int, treatment: int) -> int:
    """Index of a cell in the canonical order."""
    return _INDEX[Cell(int(bool(eligible)), int(bool(conditions)), int(bool(treatment)))]


def cell_index_from_label(label: str) -> int:
    try:
        return _LABEL_INDEX[label]
    except KeyError:
        raise KeyError(
            f"unknown cell label {label!r}; expected one of {', '.join(CELL_LABELS)}"
        ) from None
