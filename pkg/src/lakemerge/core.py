"""Relational primitives: typed cell values, immutable tables, null masks.

A cell is Null, Text, or Number. Numbers are finite decimals kept in a
canonical string form so that equality, hashing and embedding all operate on
one representation (Number("1.50") == Number("1.5"), and both render as
"1.5"). Tables are immutable: attribute names are unique and ordered, every
row has one cell per attribute, and every row carries a provenance index
identifying its source.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Iterable, Sequence

__all__ = [
    "Value",
    "NULL",
    "Row",
    "MaskVector",
    "Table",
    "parse_cell",
    "canonical_decimal",
    "mask_vector",
    "outer_union",
    "read_csv",
    "write_csv",
]

_NULL_KIND = "null"
_TEXT_KIND = "text"
_NUMBER_KIND = "number"

# Strict decimal literal: optional sign, digits with optional fraction or a
# bare fraction, optional exponent. Deliberately excludes whitespace,
# underscores, "Infinity" and "NaN", all of which Decimal() would accept.
_DECIMAL_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


@dataclass(frozen=True, order=True)
class Value:
    """One cell: kind is "null", "text" or "number".

    ``text`` holds the payload: "" for Null, the raw string for Text, the
    canonical decimal string for Number. Ordering is (kind, text), which
    gives a stable total order used for deterministic tie-breaks.
    """

    kind: str
    text: str

    @property
    def is_null(self) -> bool:
        return self.kind == _NULL_KIND

    @property
    def is_text(self) -> bool:
        return self.kind == _TEXT_KIND

    @property
    def is_number(self) -> bool:
        return self.kind == _NUMBER_KIND

    @staticmethod
    def text_of(s: str) -> "Value":
        return Value(_TEXT_KIND, s)

    @staticmethod
    def number_of(s: str) -> "Value":
        canon = canonical_decimal(s)
        if canon is None:
            raise ValueError(f"not a finite decimal: {s!r}")
        return Value(_NUMBER_KIND, canon)

    def render(self) -> str:
        """The CSV surface form (Null renders as the empty string)."""
        return "" if self.is_null else self.text


NULL = Value(_NULL_KIND, "")


def canonical_decimal(raw: str) -> str | None:
    """Canonical plain-decimal string for ``raw``, or None if not a finite decimal.

    Canonical means: no exponent, no leading '+', no trailing fractional
    zeros, no trailing '.', and no negative zero. The canonical form parses
    back to an equal Decimal, so canonicalization round-trips.
    """
    if not _DECIMAL_RE.match(raw):
        return None
    try:
        dec = Decimal(raw)
    except InvalidOperation:  # pragma: no cover - regex should preclude this
        return None
    s = format(dec, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    if s in ("", "-", "-0"):
        s = "0"
    return s


def parse_cell(raw: str) -> Value:
    """Parse one CSV cell. Total: every string maps to exactly one Value.

    "" and the literal "NULL" (any case) are Null; strict finite decimals
    are Number (canonicalized); everything else is Text.
    """
    if raw == "" or raw.upper() == "NULL":
        return NULL
    canon = canonical_decimal(raw)
    if canon is not None:
        return Value(_NUMBER_KIND, canon)
    return Value(_TEXT_KIND, raw)


@dataclass(frozen=True)
class MaskVector:
    """Per-attribute presence bits: bits[i] == 0 iff cell i is Null."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("mask bits must be 0 or 1")


@dataclass(frozen=True)
class Row:
    """A tuple of a table: cell values plus its row id within that table."""

    row_id: int
    cells: tuple[Value, ...]

    def cell(self, idx: int) -> Value:
        return self.cells[idx]


def mask_vector(cells: Sequence[Value]) -> MaskVector:
    return MaskVector(tuple(0 if c.is_null else 1 for c in cells))


@dataclass(frozen=True)
class Table:
    """Immutable table: ordered unique attributes, rows, per-row provenance.

    ``provenance[i]`` is the index of the source that contributed row i
    (0 for tables read from a single file, source-table index after an
    outer union, synthetic source ids for injected rows).
    """

    attributes: tuple[str, ...]
    rows: tuple[tuple[Value, ...], ...]
    provenance: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(set(self.attributes)) != len(self.attributes):
            raise ValueError("attribute names must be unique")
        for r in self.rows:
            if len(r) != len(self.attributes):
                raise ValueError("row width must equal attribute count")
        if len(self.provenance) != len(self.rows):
            raise ValueError("provenance must have one entry per row")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_attrs(self) -> int:
        return len(self.attributes)

    def row(self, row_id: int) -> Row:
        return Row(row_id, self.rows[row_id])

    def iter_rows(self) -> Iterable[Row]:
        for i, cells in enumerate(self.rows):
            yield Row(i, cells)

    def attr_index(self, name: str) -> int:
        try:
            return self.attributes.index(name)
        except ValueError:
            raise KeyError(name) from None

    def column(self, idx: int) -> tuple[Value, ...]:
        return tuple(r[idx] for r in self.rows)

    def replace_rows(
        self,
        rows: Sequence[Sequence[Value]],
        provenance: Sequence[int],
    ) -> "Table":
        return Table(self.attributes, tuple(tuple(r) for r in rows), tuple(provenance))

    def drop_attributes(self, names: Iterable[str]) -> "Table":
        drop = set(names)
        keep = [i for i, a in enumerate(self.attributes) if a not in drop]
        return Table(
            tuple(self.attributes[i] for i in keep),
            tuple(tuple(r[i] for i in keep) for r in self.rows),
            self.provenance,
        )


def outer_union(tables: Sequence[Table]) -> Table:
    """Stack tables over the union of their schemas.

    The output schema lists attributes in first-seen order across the
    inputs; cells for attributes a source lacks are Null; provenance is the
    index of the source table; row ids are reassigned 0..n-1 in input order.
    """
    schema: list[str] = []
    for t in tables:
        for a in t.attributes:
            if a not in schema:
                schema.append(a)
    out_rows: list[tuple[Value, ...]] = []
    prov: list[int] = []
    for src_idx, t in enumerate(tables):
        positions = {a: i for i, a in enumerate(t.attributes)}
        for cells in t.rows:
            out_rows.append(
                tuple(cells[positions[a]] if a in positions else NULL for a in schema)
            )
            prov.append(src_idx)
    return Table(tuple(schema), tuple(out_rows), tuple(prov))


def read_csv(path: str, source: int = 0) -> Table:
    """Read a table from CSV: header row is the schema, empty cells are Null."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV, expected a header row") from None
        rows = [tuple(parse_cell(c) for c in record) for record in reader]
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise ValueError(f"{path}: row {i} has {len(r)} cells, expected {len(header)}")
    return Table(tuple(header), tuple(rows), tuple(source for _ in rows))


def write_csv(table: Table, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.attributes)
        for cells in table.rows:
            writer.writerow([c.render() for c in cells])
