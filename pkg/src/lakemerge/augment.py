"""Perturbation kinds and training-pair sampling.

Positives are near-duplicates of an anchor tuple, produced by exactly one
typo-style or semantic edit; negatives are uniform draws of other rows. The
benchmark noise injector reuses the same edit machinery.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from importlib import resources
from typing import Protocol, Sequence

import numpy as np

from .core import NULL, Row, Table, Value

__all__ = [
    "PerturbKind",
    "InapplicableKind",
    "NoSynonym",
    "NoEligibleAttribute",
    "DegenerateTuple",
    "InsufficientRows",
    "SynonymDict",
    "Paraphraser",
    "SynonymParaphraser",
    "TrainPairSet",
    "perturb_char",
    "perturb_word",
    "perturb_attribute",
    "applicable_kinds",
    "gen_positives",
    "sample_negatives",
    "build_train_pairs",
]


class InapplicableKind(Exception):
    """The value's type or length does not admit the requested edit."""


class NoSynonym(Exception):
    """Word substitution found no dictionary-covered word."""


class NoEligibleAttribute(Exception):
    """No cell of the tuple supports the attribute-level edit."""


class DegenerateTuple(Exception):
    """All cells are Null; nothing can be perturbed."""


class InsufficientRows(Exception):
    """The table is too small to draw the requested negatives."""


class PerturbKind(enum.Enum):
    ATTR_REMOVAL = "attr_removal"
    ATTR_SUBSTITUTION = "attr_substitution"
    WORD_REMOVAL = "word_removal"
    WORD_SUBSTITUTION = "word_substitution"
    WORD_SWAP = "word_swap"
    CHAR_SWAP = "char_swap"
    MISSING_CHAR = "missing_char"
    EXTRA_CHAR = "extra_char"
    NEARBY_CHAR = "nearby_char"
    SIMILAR_CHAR = "similar_char"
    SKIPPED_SPACE = "skipped_space"
    RANDOM_SPACE = "random_space"
    REPEATED_CHAR = "repeated_char"
    UNI_CHAR = "uni_char"
    DIGIT_SWAP = "digit_swap"
    MISSING_DIGIT = "missing_digit"
    EXTRA_DIGIT = "extra_digit"
    NEARBY_DIGIT = "nearby_digit"
    SIMILAR_DIGIT = "similar_digit"
    REPEATED_DIGIT = "repeated_digit"
    UNI_DIGIT = "uni_digit"


ATTRIBUTE_KINDS = frozenset({PerturbKind.ATTR_REMOVAL, PerturbKind.ATTR_SUBSTITUTION})
WORD_KINDS = frozenset(
    {PerturbKind.WORD_REMOVAL, PerturbKind.WORD_SUBSTITUTION, PerturbKind.WORD_SWAP}
)
CHAR_TEXT_KINDS = frozenset(
    {
        PerturbKind.CHAR_SWAP,
        PerturbKind.MISSING_CHAR,
        PerturbKind.EXTRA_CHAR,
        PerturbKind.NEARBY_CHAR,
        PerturbKind.SIMILAR_CHAR,
        PerturbKind.SKIPPED_SPACE,
        PerturbKind.RANDOM_SPACE,
        PerturbKind.REPEATED_CHAR,
        PerturbKind.UNI_CHAR,
    }
)
CHAR_DIGIT_KINDS = frozenset(
    {
        PerturbKind.DIGIT_SWAP,
        PerturbKind.MISSING_DIGIT,
        PerturbKind.EXTRA_DIGIT,
        PerturbKind.NEARBY_DIGIT,
        PerturbKind.SIMILAR_DIGIT,
        PerturbKind.REPEATED_DIGIT,
        PerturbKind.UNI_DIGIT,
    }
)

# Deterministic iteration order for uniform kind draws.
_KIND_ORDER = tuple(PerturbKind)

_LETTERS = "abcdefghijklmnopqrstuvwxyz"
_DIGITS = "0123456789"


def _load_map(name: str) -> dict[str, tuple[str, ...]]:
    text = resources.files("lakemerge.data").joinpath(name).read_text("utf-8")
    out: dict[str, tuple[str, ...]] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, alts = line.partition("\t")
        out[key] = tuple(a for a in alts.strip().split(",") if a)
    return out


def _load_tsv_map(path: str) -> dict[str, tuple[str, ...]]:
    out: dict[str, tuple[str, ...]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            key, _, alts = line.partition("\t")
            out[key] = tuple(a for a in alts.strip().split(",") if a)
    return out


_QWERTY = _load_map("qwerty_neighbors.tsv")
_CHAR_CONFUSION = _load_map("char_confusions.tsv")
_DIGIT_NEIGHBOR = _load_map("digit_neighbors.tsv")
_DIGIT_CONFUSION = _load_map("digit_confusions.tsv")


class SynonymDict:
    """Flat word -> synonyms dictionary (TSV: word TAB syn,syn,...)."""

    def __init__(self, entries: dict[str, tuple[str, ...]]):
        self._entries = {k.lower(): v for k, v in entries.items() if v}

    @classmethod
    def from_tsv(cls, path: str) -> "SynonymDict":
        return cls(_load_tsv_map(path))

    @classmethod
    def default(cls) -> "SynonymDict":
        return cls(_load_map("synonyms.tsv"))

    def lookup(self, word: str) -> tuple[str, ...]:
        return self._entries.get(word.lower(), ())

    def has(self, word: str) -> bool:
        return word.lower() in self._entries

    def canonical_map(self) -> dict[str, str]:
        """Lowercased word -> headword, headwords included; when a word
        appears under several heads the first entry wins."""
        canon: dict[str, str] = {}
        for head, syns in self._entries.items():
            canon.setdefault(head, head)
            for s in syns:
                canon.setdefault(s.lower(), head)
        return canon

    def __len__(self) -> int:
        return len(self._entries)


class Paraphraser(Protocol):
    def paraphrase(self, text: str, rng: np.random.Generator) -> str: ...


def _match_case(template: str, replacement: str) -> str:
    if template.isupper() and len(template) > 1:
        return replacement.upper()
    if template[:1].isupper():
        return replacement.capitalize()
    return replacement


class SynonymParaphraser:
    """Replaces one dictionary-covered word with a random synonym.

    Texts with no covered word come back unchanged; output is never empty
    for non-empty input.
    """

    def __init__(self, synonyms: SynonymDict | None = None):
        self.synonyms = synonyms if synonyms is not None else SynonymDict.default()

    def paraphrase(self, text: str, rng: np.random.Generator) -> str:
        words = text.split()
        covered = [i for i, w in enumerate(words) if self.synonyms.has(w)]
        if not covered:
            return text
        idx = covered[int(rng.integers(len(covered)))]
        alts = self.synonyms.lookup(words[idx])
        words[idx] = _match_case(words[idx], alts[int(rng.integers(len(alts)))])
        return " ".join(words)


# ---------------------------------------------------------------------------
# char-level edits


def _levenshtein(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[-1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def _char_positions(s: str, pred) -> list[int]:
    return [i for i, ch in enumerate(s) if pred(ch)]


def _pick(rng: np.random.Generator, options: Sequence) -> object:
    return options[int(rng.integers(len(options)))]


def _edit_text(s: str, kind: PerturbKind, rng: np.random.Generator) -> str:
    if kind is PerturbKind.CHAR_SWAP:
        pos = [i for i in range(len(s) - 1) if s[i] != s[i + 1]]
        if not pos:
            raise InapplicableKind(kind.value)
        i = _pick(rng, pos)
        return s[:i] + s[i + 1] + s[i] + s[i + 2 :]
    if kind is PerturbKind.MISSING_CHAR:
        if len(s) < 2:
            raise InapplicableKind(kind.value)
        i = int(rng.integers(len(s)))
        return s[:i] + s[i + 1 :]
    if kind is PerturbKind.EXTRA_CHAR:
        if not s:
            raise InapplicableKind(kind.value)
        i = int(rng.integers(len(s) + 1))
        return s[:i] + _pick(rng, _LETTERS) + s[i:]
    if kind is PerturbKind.NEARBY_CHAR:
        pos = _char_positions(s, lambda c: c.lower() in _QWERTY)
        if not pos:
            raise InapplicableKind(kind.value)
        i = _pick(rng, pos)
        repl = _pick(rng, _QWERTY[s[i].lower()])
        return s[:i] + _match_case(s[i], repl) + s[i + 1 :]
    if kind is PerturbKind.SIMILAR_CHAR:
        pos = _char_positions(s, lambda c: c in _CHAR_CONFUSION)
        if not pos:
            raise InapplicableKind(kind.value)
        i = _pick(rng, pos)
        return s[:i] + _pick(rng, _CHAR_CONFUSION[s[i]]) + s[i + 1 :]
    if kind is PerturbKind.SKIPPED_SPACE:
        pos = _char_positions(s, lambda c: c == " ")
        if not pos:
            raise InapplicableKind(kind.value)
        i = _pick(rng, pos)
        return s[:i] + s[i + 1 :]
    if kind is PerturbKind.RANDOM_SPACE:
        # interior positions not already adjacent to a space
        pos = [i for i in range(1, len(s)) if s[i - 1] != " " and s[i] != " "]
        if not pos:
            raise InapplicableKind(kind.value)
        i = _pick(rng, pos)
        return s[:i] + " " + s[i:]
    if kind is PerturbKind.REPEATED_CHAR:
        pos = _char_positions(s, str.isalnum)
        if not pos:
            raise InapplicableKind(kind.value)
        i = _pick(rng, pos)
        return s[:i] + s[i] + s[i:]
    if kind is PerturbKind.UNI_CHAR:
        pos = [i for i in range(len(s) - 1) if s[i] == s[i + 1] and s[i].isalpha()]
        if not pos:
            raise InapplicableKind(kind.value)
        i = _pick(rng, pos)
        return s[:i] + s[i + 1 :]
    raise InapplicableKind(f"{kind.value} is not a text edit")


def _edit_digits(s: str, kind: PerturbKind, rng: np.random.Generator) -> str:
    digit_pos = _char_positions(s, str.isdigit)
    if kind is PerturbKind.DIGIT_SWAP:
        pos = [
            i
            for i in range(len(s) - 1)
            if s[i].isdigit() and s[i + 1].isdigit() and s[i] != s[i + 1]
        ]
        if not pos:
            raise InapplicableKind(kind.value)
        i = _pick(rng, pos)
        return s[:i] + s[i + 1] + s[i] + s[i + 2 :]
    if kind is PerturbKind.MISSING_DIGIT:
        if len(digit_pos) < 2:
            raise InapplicableKind(kind.value)
        i = _pick(rng, digit_pos)
        return s[:i] + s[i + 1 :]
    if kind is PerturbKind.EXTRA_DIGIT:
        if not digit_pos:
            raise InapplicableKind(kind.value)
        anchor = _pick(rng, digit_pos)
        i = anchor + int(rng.integers(2))  # insert before or after a digit
        return s[:i] + _pick(rng, _DIGITS) + s[i:]
    if kind is PerturbKind.NEARBY_DIGIT:
        pos = [i for i in digit_pos if s[i] in _DIGIT_NEIGHBOR]
        if not pos:
            raise InapplicableKind(kind.value)
        i = _pick(rng, pos)
        return s[:i] + _pick(rng, _DIGIT_NEIGHBOR[s[i]]) + s[i + 1 :]
    if kind is PerturbKind.SIMILAR_DIGIT:
        pos = [i for i in digit_pos if s[i] in _DIGIT_CONFUSION]
        if not pos:
            raise InapplicableKind(kind.value)
        i = _pick(rng, pos)
        return s[:i] + _pick(rng, _DIGIT_CONFUSION[s[i]]) + s[i + 1 :]
    if kind is PerturbKind.REPEATED_DIGIT:
        if not digit_pos:
            raise InapplicableKind(kind.value)
        i = _pick(rng, digit_pos)
        return s[:i] + s[i] + s[i:]
    if kind is PerturbKind.UNI_DIGIT:
        pos = [
            i for i in range(len(s) - 1) if s[i].isdigit() and s[i] == s[i + 1]
        ]
        if not pos:
            raise InapplicableKind(kind.value)
        i = _pick(rng, pos)
        return s[:i] + s[i + 1 :]
    raise InapplicableKind(f"{kind.value} is not a digit edit")


def perturb_char(value: Value, kind: PerturbKind, rng: np.random.Generator) -> Value:
    """Apply one char-level edit; the result always differs from the input.

    Text values take the text kinds, Numbers take the digit kinds (applied
    to the canonical decimal string; the result must still be a valid,
    canonically different decimal). Raises InapplicableKind when the value
    cannot support the edit.
    """
    if value.is_null:
        raise InapplicableKind("cannot perturb Null")
    if value.is_text:
        if kind not in CHAR_TEXT_KINDS:
            raise InapplicableKind(f"{kind.value} does not apply to text")
        for _ in range(8):
            edited = _edit_text(value.text, kind, rng)
            if edited != value.text:
                return Value.text_of(edited)
        raise InapplicableKind(kind.value)
    if kind not in CHAR_DIGIT_KINDS:
        raise InapplicableKind(f"{kind.value} does not apply to numbers")
    from .core import canonical_decimal

    for _ in range(8):
        edited = _edit_digits(value.text, kind, rng)
        canon = canonical_decimal(edited)
        # canonicalization may amplify the edit (leading-zero collapse);
        # keep the one-edit character budget honest
        if canon is not None and canon != value.text and _levenshtein(value.text, canon) <= 2:
            return Value("number", canon)
    raise InapplicableKind(kind.value)


def perturb_word(
    value: Value,
    kind: PerturbKind,
    synonyms: SynonymDict,
    rng: np.random.Generator,
) -> Value:
    """Apply one word-level edit to a Text value."""
    if not value.is_text:
        raise InapplicableKind("word edits require text")
    words = value.text.split()
    if not words:
        raise InapplicableKind("no words")
    if kind is PerturbKind.WORD_REMOVAL:
        if len(words) < 2:
            raise InapplicableKind("removal needs >= 2 words")
        i = int(rng.integers(len(words)))
        return Value.text_of(" ".join(words[:i] + words[i + 1 :]))
    if kind is PerturbKind.WORD_SUBSTITUTION:
        covered = [i for i, w in enumerate(words) if synonyms.has(w)]
        if not covered:
            raise NoSynonym(value.text)
        i = _pick(rng, covered)
        alts = synonyms.lookup(words[i])
        words[i] = _match_case(words[i], _pick(rng, alts))
        return Value.text_of(" ".join(words))
    if kind is PerturbKind.WORD_SWAP:
        pos = [i for i in range(len(words) - 1) if words[i] != words[i + 1]]
        if not pos:
            raise InapplicableKind("swap needs two differing adjacent words")
        i = _pick(rng, pos)
        words[i], words[i + 1] = words[i + 1], words[i]
        return Value.text_of(" ".join(words))
    raise InapplicableKind(f"{kind.value} is not a word edit")


def perturb_attribute(
    row: Row,
    kind: PerturbKind,
    paraphraser: Paraphraser,
    rng: np.random.Generator,
) -> Row:
    """Remove one cell, or paraphrase one textual cell."""
    if kind is PerturbKind.ATTR_REMOVAL:
        eligible = [i for i, c in enumerate(row.cells) if not c.is_null]
        if not eligible:
            raise NoEligibleAttribute("all cells Null")
        i = _pick(rng, eligible)
        cells = list(row.cells)
        cells[i] = NULL
        return Row(row.row_id, tuple(cells))
    if kind is PerturbKind.ATTR_SUBSTITUTION:
        eligible = [i for i, c in enumerate(row.cells) if c.is_text]
        if not eligible:
            raise NoEligibleAttribute("no textual cell")
        i = _pick(rng, eligible)
        cells = list(row.cells)
        cells[i] = Value.text_of(paraphraser.paraphrase(cells[i].text, rng))
        return Row(row.row_id, tuple(cells))
    raise NoEligibleAttribute(f"{kind.value} is not attribute-level")


# ---------------------------------------------------------------------------
# applicability and sampling


def _text_kind_eligible(s: str, kind: PerturbKind) -> bool:
    if kind is PerturbKind.CHAR_SWAP:
        return any(s[i] != s[i + 1] for i in range(len(s) - 1))
    if kind is PerturbKind.MISSING_CHAR:
        return len(s) >= 2
    if kind is PerturbKind.EXTRA_CHAR:
        return len(s) >= 1
    if kind is PerturbKind.NEARBY_CHAR:
        return any(c.lower() in _QWERTY for c in s)
    if kind is PerturbKind.SIMILAR_CHAR:
        return any(c in _CHAR_CONFUSION for c in s)
    if kind is PerturbKind.SKIPPED_SPACE:
        return " " in s
    if kind is PerturbKind.RANDOM_SPACE:
        return any(s[i - 1] != " " and s[i] != " " for i in range(1, len(s)))
    if kind is PerturbKind.REPEATED_CHAR:
        return any(c.isalnum() for c in s)
    if kind is PerturbKind.UNI_CHAR:
        return any(s[i] == s[i + 1] and s[i].isalpha() for i in range(len(s) - 1))
    return False


def _digit_kind_eligible(s: str, kind: PerturbKind) -> bool:
    digits = [c for c in s if c.isdigit()]
    if kind is PerturbKind.DIGIT_SWAP:
        return any(
            s[i].isdigit() and s[i + 1].isdigit() and s[i] != s[i + 1]
            for i in range(len(s) - 1)
        )
    if kind is PerturbKind.MISSING_DIGIT:
        return len(digits) >= 2
    if kind in (PerturbKind.EXTRA_DIGIT, PerturbKind.REPEATED_DIGIT):
        return len(digits) >= 1
    if kind is PerturbKind.NEARBY_DIGIT:
        return any(c in _DIGIT_NEIGHBOR for c in digits)
    if kind is PerturbKind.SIMILAR_DIGIT:
        return any(c in _DIGIT_CONFUSION for c in digits)
    if kind is PerturbKind.UNI_DIGIT:
        return any(
            s[i].isdigit() and s[i] == s[i + 1] for i in range(len(s) - 1)
        )
    return False


def _word_kind_eligible(s: str, kind: PerturbKind, synonyms: SynonymDict) -> bool:
    words = s.split()
    if kind is PerturbKind.WORD_REMOVAL:
        return len(words) >= 2
    if kind is PerturbKind.WORD_SUBSTITUTION:
        return any(synonyms.has(w) for w in words)
    if kind is PerturbKind.WORD_SWAP:
        return any(words[i] != words[i + 1] for i in range(len(words) - 1))
    return False


def _kind_cells(
    cells: Sequence[Value], kind: PerturbKind, synonyms: SynonymDict
) -> list[int]:
    """Indices of cells that can take this kind."""
    out = []
    for i, c in enumerate(cells):
        if c.is_null:
            continue
        if kind is PerturbKind.ATTR_REMOVAL:
            out.append(i)
        elif kind is PerturbKind.ATTR_SUBSTITUTION:
            if c.is_text:
                out.append(i)
        elif kind in WORD_KINDS:
            if c.is_text and _word_kind_eligible(c.text, kind, synonyms):
                out.append(i)
        elif kind in CHAR_TEXT_KINDS:
            if c.is_text and _text_kind_eligible(c.text, kind):
                out.append(i)
        elif kind in CHAR_DIGIT_KINDS:
            if c.is_number and _digit_kind_eligible(c.text, kind):
                out.append(i)
    return out


def applicable_kinds(cells: Sequence[Value], synonyms: SynonymDict) -> list[PerturbKind]:
    """Kinds with at least one eligible cell, in declaration order."""
    return [k for k in _KIND_ORDER if _kind_cells(cells, k, synonyms)]


def _apply_kind(
    row: Row,
    kind: PerturbKind,
    cell_idx: int,
    paraphraser: "SynonymParaphraser",
    synonyms: SynonymDict,
    rng: np.random.Generator,
) -> Row:
    if kind in ATTRIBUTE_KINDS:
        # perturb_attribute draws its own cell; the draw here fixes it for
        # uniformity with the other levels
        cells = list(row.cells)
        if kind is PerturbKind.ATTR_REMOVAL:
            cells[cell_idx] = NULL
        else:
            cells[cell_idx] = Value.text_of(
                paraphraser.paraphrase(cells[cell_idx].text, rng)
            )
        return Row(row.row_id, tuple(cells))
    cells = list(row.cells)
    if kind in WORD_KINDS:
        cells[cell_idx] = perturb_word(cells[cell_idx], kind, synonyms, rng)
    else:
        cells[cell_idx] = perturb_char(cells[cell_idx], kind, rng)
    return Row(row.row_id, tuple(cells))


_RETRY_BOUND = 32


def gen_positives(
    row: Row,
    n_pos: int,
    paraphraser: "SynonymParaphraser",
    rng: np.random.Generator,
) -> list[tuple[Row, PerturbKind]]:
    """n_pos perturbed copies of ``row``, each by one uniformly drawn kind.

    Kind draws that fail at the cell level are retried up to 32 times, then
    the positive falls back to AttrRemoval. Raises DegenerateTuple for
    all-Null rows.
    """
    if all(c.is_null for c in row.cells):
        raise DegenerateTuple(f"row {row.row_id}")
    synonyms = paraphraser.synonyms
    kinds = applicable_kinds(row.cells, synonyms)
    out: list[tuple[Row, PerturbKind]] = []
    for _ in range(n_pos):
        produced = None
        for _attempt in range(_RETRY_BOUND):
            kind = kinds[int(rng.integers(len(kinds)))]
            eligible = _kind_cells(row.cells, kind, synonyms)
            cell_idx = eligible[int(rng.integers(len(eligible)))]
            try:
                produced = (
                    _apply_kind(row, kind, cell_idx, paraphraser, synonyms, rng),
                    kind,
                )
                break
            except (InapplicableKind, NoSynonym):
                continue
        if produced is None:
            nn = [i for i, c in enumerate(row.cells) if not c.is_null]
            idx = nn[int(rng.integers(len(nn)))]
            cells = list(row.cells)
            cells[idx] = NULL
            produced = (Row(row.row_id, tuple(cells)), PerturbKind.ATTR_REMOVAL)
        out.append(produced)
    return out


def sample_negatives(
    row: Row, table: Table, n_neg: int, rng: np.random.Generator
) -> list[int]:
    """n_neg distinct row ids drawn uniformly, excluding the anchor's."""
    pool = [i for i in range(table.n_rows) if i != row.row_id]
    if len(pool) < n_neg:
        raise InsufficientRows(f"need {n_neg} negatives, have {len(pool)} rows")
    picked = rng.choice(len(pool), size=n_neg, replace=False)
    return [pool[int(i)] for i in picked]


@dataclass(frozen=True)
class TrainPairSet:
    """Fixed training pairs: per anchor, its positives and negative row ids."""

    anchors: tuple[int, ...]
    positives: tuple[tuple[tuple[Row, PerturbKind], ...], ...]
    negatives: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not (len(self.anchors) == len(self.positives) == len(self.negatives)):
            raise ValueError("per-anchor lists must align")
        for a, negs in zip(self.anchors, self.negatives):
            if a in negs:
                raise ValueError("anchor present in its own negatives")


def build_train_pairs(
    table: Table,
    n_pos: int,
    n_neg: int,
    paraphraser: "SynonymParaphraser",
    rng: np.random.Generator,
) -> tuple[TrainPairSet, int]:
    """Pair set over all usable anchors; returns (pairs, skipped_anchor_count).

    All-Null rows cannot anchor a positive and are skipped.
    """
    anchors: list[int] = []
    positives = []
    negatives = []
    skipped = 0
    for r in table.iter_rows():
        if all(c.is_null for c in r.cells):
            skipped += 1
            continue
        pos = gen_positives(r, n_pos, paraphraser, rng)
        neg = sample_negatives(r, table, n_neg, rng)
        anchors.append(r.row_id)
        positives.append(tuple(pos))
        negatives.append(tuple(neg))
    return TrainPairSet(tuple(anchors), tuple(positives), tuple(negatives)), skipped
