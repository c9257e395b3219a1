"""Synthetic benchmark generation: clean tables, ground truth, noise, conflicts.

A benchmark bundle is built in four steps: synthesize per-source clean tables
that share entities, derive ground truth from planted entity ids, corrupt a
controlled fraction of cells with semantic and typographic noise, and append
conflicting near-duplicate tuples attributed to synthetic sources of varying
reliability.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .augment import (
    CHAR_DIGIT_KINDS,
    CHAR_TEXT_KINDS,
    InapplicableKind,
    Paraphraser,
    SynonymParaphraser,
    perturb_char,
)
from .core import NULL, Table, Value, outer_union, read_csv, write_csv
from .discover import Partition, bron_kerbosch, cliques_to_partition
from .discover import Graph
from .seeds import rng_for

__all__ = [
    "CONFLICT_SOURCE_BASE",
    "ENTITY_ATTR",
    "BenchParams",
    "Bundle",
    "ConflictSet",
    "ConflictTruth",
    "GroundTruth",
    "NoKeyAttributes",
    "NoiseConfig",
    "NoiseEntry",
    "build_ground_truth",
    "extend_ground_truth",
    "generate",
    "generate_conflicts",
    "inject_noise",
    "load_bundle",
    "noise_mix_fractions",
    "synth_clean",
    "write_bundle",
]

# Hidden column carrying the planted entity id; stripped before any
# benchmark consumer sees the data.
ENTITY_ATTR = "_entity"

# Provenance ids for conflict tuples start here so they can never collide
# with input-table indices.
CONFLICT_SOURCE_BASE = 1000

# (semantic %, typographic %) of all non-null cells, before rate scaling.
_NOISE_MIXES: dict[str, tuple[int, int]] = {
    "se_heavy": (10, 20),
    "balanced": (15, 15),
    "te_heavy": (20, 10),
}

_DEFAULT_MIX_RATE = 0.30


class NoKeyAttributes(Exception):
    """No key attribute is shared by a pair of rows being compared."""


def noise_mix_fractions(mix: str, rate: float) -> tuple[float, float]:
    """Split an overall cell-corruption rate into (semantic, typographic).

    The named mixes fix the split at specific percentages of the cell count;
    for rates other than the 30% they sum to, the same proportions are
    rescaled so the total stays at `rate`.
    """
    if mix not in _NOISE_MIXES:
        raise ValueError(f"unknown noise mix {mix!r}; expected one of {sorted(_NOISE_MIXES)}")
    se_pct, te_pct = _NOISE_MIXES[mix]
    total = se_pct + te_pct
    return rate * se_pct / total, rate * te_pct / total


@dataclass(frozen=True)
class NoiseConfig:
    """How much noise to inject and in what proportion."""

    rate: float = _DEFAULT_MIX_RATE
    mix: str = "balanced"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"noise rate must be in [0, 1], got {self.rate}")
        if self.mix not in _NOISE_MIXES:
            raise ValueError(
                f"unknown noise mix {self.mix!r}; expected one of {sorted(_NOISE_MIXES)}"
            )

    def fractions(self) -> tuple[float, float]:
        return noise_mix_fractions(self.mix, self.rate)


@dataclass(frozen=True)
class NoiseEntry:
    """One corrupted cell: where, what it was, what it became, and how."""

    row: int
    attr: str
    original: str
    new: str
    kind: str

    def to_json(self) -> dict:
        return {
            "row": self.row,
            "attr": self.attr,
            "original": self.original,
            "new": self.new,
            "kind": self.kind,
        }

    @staticmethod
    def from_json(obj: Mapping) -> "NoiseEntry":
        return NoiseEntry(
            row=int(obj["row"]),
            attr=str(obj["attr"]),
            original=str(obj["original"]),
            new=str(obj["new"]),
            kind=str(obj["kind"]),
        )


@dataclass(frozen=True)
class ConflictSet:
    """Conflicting tuples appended for one entity set.

    `rows` pairs each appended row id with the synthetic source that claims
    it; `truth` is the correct value of `target_attr` (the template tuple's
    value before any source corrupted it).
    """

    set_id: int
    target_attr: int
    truth: str
    rows: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if not self.rows:
            raise ValueError("conflict set must contain at least one row")
        sources = [s for _, s in self.rows]
        if len(set(sources)) != len(sources):
            raise ValueError("conflict rows must come from distinct sources")


@dataclass(frozen=True)
class ConflictTruth:
    """All injected conflicts plus the hidden per-source reliability."""

    sets: tuple[ConflictSet, ...]
    reliability: tuple[tuple[int, float], ...]
    skipped: int = 0

    def reliability_map(self) -> dict[int, float]:
        return dict(self.reliability)


@dataclass(frozen=True)
class GroundTruth:
    """Integrable pairs and the partition they induce, plus any conflicts."""

    n: int
    pairs: frozenset[tuple[int, int]]
    partition: Partition
    conflicts: ConflictTruth | None = None

    def __post_init__(self) -> None:
        if self.partition.n != self.n:
            raise ValueError("partition size does not match row count")
        for a, b in self.pairs:
            if not (0 <= a < b < self.n):
                raise ValueError(f"bad pair ({a}, {b}) for n={self.n}")


# ---------------------------------------------------------------------------
# Clean-table synthesis


# Vocabularies for textual attributes. Most values have dictionary synonyms
# so semantic noise can hit them; a few city names deliberately have none,
# exercising the skip-and-resample path in the injector.
_COLORS = (
    "red", "blue", "green", "black", "white", "silver", "purple", "brown",
    "yellow", "gray", "orange", "pink", "teal", "cyan", "magenta", "maroon",
    "olive", "navy", "beige", "turquoise", "indigo", "coral", "salmon",
    "khaki", "lavender", "plum", "mint", "rust", "charcoal", "cream", "gold",
    "lilac", "periwinkle", "mustard", "burgundy", "sienna", "tan", "fuchsia",
    "ochre", "peach",
)
_MATERIALS = (
    "steel", "oak", "glass", "leather", "cotton", "marble", "copper",
    "plastic", "bamboo", "wool", "pine", "maple", "walnut", "birch", "cedar",
    "mahogany", "concrete", "ceramic", "porcelain", "titanium", "aluminum",
    "nickel", "zinc", "tin", "iron", "silk", "linen", "velvet", "denim",
    "suede", "nylon", "polyester", "rubber", "foam", "cork", "slate",
    "quartz", "limestone", "sandstone", "teak",
)
_CATEGORIES = (
    "furniture", "electronics", "clothing", "toys", "books", "tools",
    "garden", "sports", "kitchen", "office", "lighting", "bedding",
    "bathroom", "outdoor", "automotive", "jewelry", "footwear", "luggage",
    "stationery", "crafts", "music", "games", "hardware", "appliances",
    "decor", "artwork", "antiques", "pottery", "seasonal", "pets", "baby",
    "travel", "fitness", "beauty", "health", "photo", "audio", "video",
    "software", "grocery",
)
_COUNTRIES = (
    "france", "germany", "spain", "italy", "austria", "portugal", "ireland",
    "norway", "poland", "greece", "denmark", "sweden", "finland", "iceland",
    "belgium", "netherlands", "luxembourg", "switzerland", "hungary",
    "romania", "bulgaria", "croatia", "slovenia", "slovakia", "estonia",
    "latvia", "lithuania", "malta", "cyprus", "albania", "serbia", "bosnia",
    "montenegro", "macedonia", "moldova", "ukraine", "belarus", "turkey",
    "georgia", "armenia",
)
_CITIES = (
    "rome", "vienna", "prague", "warsaw", "lisbon", "london", "paris",
    "berlin", "madrid", "dublin", "amsterdam", "brussels", "copenhagen",
    "stockholm", "oslo", "helsinki", "reykjavik", "budapest", "bucharest",
    "sofia", "zagreb", "ljubljana", "bratislava", "tallinn", "riga",
    "vilnius", "valletta", "nicosia", "tirana", "belgrade", "sarajevo",
    "podgorica", "skopje", "chisinau", "kyiv", "minsk", "ankara", "tbilisi",
    "yerevan", "athens",
)

# Key-attribute vocabulary. Names are brand + line + serial: identity-like
# strings deliberately disjoint from every descriptive vocabulary above and
# from the synonym dictionary, so key similarity never correlates with
# chance agreement on descriptive columns and never picks up semantic noise
# (serial-style identifiers have no synonyms).
_BRANDS = (
    "acme", "zenith", "vertex", "lumen", "quasar", "nimbus", "solstice",
    "meridian", "borealis", "cascadia", "elystra", "fenwick", "galvano",
    "halcyon", "isoline", "junctor", "kestrel", "lattice", "momentum",
    "nocturne", "obsidian", "paragon", "quorum", "radian", "stratus",
    "tesseract", "umbra", "vantage", "wavecrest", "xenith", "yonder",
    "zephyr", "arclight", "brimstone", "octagon", "dynamo", "everest",
    "firmament", "gyroscope", "helix",
)
_LINES = (
    "alpha", "nova", "vega", "delta", "omega", "titan", "atlas", "comet",
    "pulsar", "orbit", "nebula", "quark", "photon", "vector", "matrix",
    "cipher", "prism", "axiom", "tensor", "scalar", "lambda", "sigma",
    "kappa", "theta", "epsilon", "zeta", "proton", "neutron", "electron",
    "meson", "hadron", "lepton", "boson", "graviton", "tachyon", "phonon",
    "exciton", "polaron", "magnon", "soliton",
)

# Non-key attribute pool; each synthesized table carries the key attribute
# plus a contiguous window over this list.
_ATTR_POOL = ("city", "country", "color", "material", "category", "year", "price", "quantity", "rating")

_KEY_ATTR = "name"


def _entity_values(rng: np.random.Generator, serial: int) -> dict[str, Value]:
    # Numeric values keep at least three characters and wide ranges: very
    # short or low-cardinality columns make unrelated rows collide by chance,
    # which says nothing about an integrator's matching quality.
    brand = _BRANDS[int(rng.integers(len(_BRANDS)))]
    line = _LINES[int(rng.integers(len(_LINES)))]
    cents = int(rng.integers(100, 100000))
    return {
        _KEY_ATTR: Value.text_of(f"{brand} {line} {serial}"),
        "city": Value.text_of(_CITIES[int(rng.integers(len(_CITIES)))]),
        "country": Value.text_of(_COUNTRIES[int(rng.integers(len(_COUNTRIES)))]),
        "color": Value.text_of(_COLORS[int(rng.integers(len(_COLORS)))]),
        "material": Value.text_of(_MATERIALS[int(rng.integers(len(_MATERIALS)))]),
        "category": Value.text_of(_CATEGORIES[int(rng.integers(len(_CATEGORIES)))]),
        "year": Value.number_of(str(int(rng.integers(1950, 2025)))),
        "price": Value.number_of(f"{cents // 100}.{cents % 100:02d}"),
        "quantity": Value.number_of(str(int(rng.integers(100, 1000)))),
        "rating": Value.number_of(f"{int(rng.integers(1, 10))}.{int(rng.integers(1, 10))}"),
    }


def synth_clean(
    entities: int = 200,
    tables: int = 3,
    attrs_per_table: int = 6,
    overlap: int = 3,
    drop_prob: float = 0.2,
    missing_prob: float = 0.15,
    seed: int = 0,
) -> list[Table]:
    """Synthesize clean per-source tables over a shared entity population.

    Every table carries the key attribute plus a window of non-key
    attributes; consecutive windows share `overlap` attributes. Each entity
    appears in each table unless dropped (w.p. `drop_prob`); present rows
    lose non-key cells to Null w.p. `missing_prob`. Key cells are never
    blanked, so ground truth stays derivable. A hidden entity-id column is
    appended last; strip it before handing tables to any consumer.
    """
    if entities < 1:
        raise ValueError(f"entities must be >= 1, got {entities}")
    if tables < 1:
        raise ValueError(f"tables must be >= 1, got {tables}")
    width = attrs_per_table - 1
    if not 1 <= width <= len(_ATTR_POOL):
        raise ValueError(
            f"attrs_per_table must be in [2, {len(_ATTR_POOL) + 1}], got {attrs_per_table}"
        )
    if not 0 <= overlap < width:
        raise ValueError(f"overlap must be in [0, {width - 1}], got {overlap}")
    if not 0.0 <= drop_prob < 1.0:
        raise ValueError(f"drop_prob must be in [0, 1), got {drop_prob}")
    if not 0.0 <= missing_prob <= 1.0:
        raise ValueError(f"missing_prob must be in [0, 1], got {missing_prob}")

    value_rng = rng_for(seed, "synth-entities")
    # Five-digit serials, unique across the universe so key strings are too.
    serials = value_rng.choice(90000, size=entities, replace=False) + 10000
    rows_of = [_entity_values(value_rng, int(serials[i])) for i in range(entities)]

    presence_rng = rng_for(seed, "synth-presence")
    missing_rng = rng_for(seed, "synth-missing")

    stride = width - overlap
    out: list[Table] = []
    for t in range(tables):
        start = (t * stride) % len(_ATTR_POOL)
        window = tuple(_ATTR_POOL[(start + j) % len(_ATTR_POOL)] for j in range(width))
        attrs = (_KEY_ATTR, *window, ENTITY_ATTR)
        rows: list[tuple[Value, ...]] = []
        for i in range(entities):
            if presence_rng.random() < drop_prob:
                continue
            cells = [rows_of[i][_KEY_ATTR]]
            for a in window:
                if missing_rng.random() < missing_prob:
                    cells.append(NULL)
                else:
                    cells.append(rows_of[i][a])
            cells.append(Value.number_of(str(i)))
            rows.append(tuple(cells))
        out.append(Table(attrs, tuple(rows), tuple([t] * len(rows))))
    return out


# ---------------------------------------------------------------------------
# Ground truth


def build_ground_truth(table: Table, key_attrs: Sequence[str]) -> GroundTruth:
    """Derive integrable pairs and their partition from key-attribute equality.

    Two rows are integrable when they share at least one key attribute with
    both sides non-Null and agree exactly on every shared one. The partition
    comes from maximal cliques of the pair graph, largest first.
    """
    if not key_attrs:
        raise NoKeyAttributes("at least one key attribute is required")
    try:
        key_idx = [table.attr_index(a) for a in key_attrs]
    except KeyError as exc:
        raise NoKeyAttributes(f"key attribute {exc.args[0]!r} not in table") from None

    n = table.n_rows
    keys = [tuple(table.rows[r][k] for k in key_idx) for r in range(n)]
    pairs: set[tuple[int, int]] = set()
    # Group rows by their full key signature first; only signatures that can
    # disagree on a shared attribute need the pairwise check.
    by_sig: dict[tuple, list[int]] = {}
    for r in range(n):
        sig = tuple((v.kind, v.text) if not v.is_null else None for v in keys[r])
        by_sig.setdefault(sig, []).append(r)
    sigs = sorted(by_sig, key=lambda s: by_sig[s][0])
    for si, sig_a in enumerate(sigs):
        rows_a = by_sig[sig_a]
        # Same signature: integrable iff at least one key is non-Null.
        if any(v is not None for v in sig_a):
            for x in range(len(rows_a)):
                for y in range(x + 1, len(rows_a)):
                    pairs.add((rows_a[x], rows_a[y]))
        for sig_b in sigs[si + 1 :]:
            shared = [
                (va, vb)
                for va, vb in zip(sig_a, sig_b)
                if va is not None and vb is not None
            ]
            if not shared or any(va != vb for va, vb in shared):
                continue
            for a in rows_a:
                for b in by_sig[sig_b]:
                    pairs.add((min(a, b), max(a, b)))

    graph = Graph.from_edges(n, pairs)
    partition = cliques_to_partition(bron_kerbosch(graph), n)
    return GroundTruth(n=n, pairs=frozenset(pairs), partition=partition)


# ---------------------------------------------------------------------------
# Noise injection


def inject_noise(
    table: Table,
    config: NoiseConfig,
    paraphraser: Paraphraser | None = None,
    exempt_rows: frozenset[int] = frozenset(),
) -> tuple[Table, tuple[NoiseEntry, ...]]:
    """Corrupt a controlled fraction of non-Null cells.

    Cell quotas are exact: round(N * fraction) cells get semantic noise
    (a synonym paraphrase that must change the text) and round(N * fraction)
    get typographic noise (a character-level edit suited to the cell kind).
    Cells where no edit applies are skipped and the walk continues, so the
    achieved counts only fall short when the table runs out of editable
    cells; that case is reported with a warning. Null cells and exempt rows
    are never touched, and each cell is corrupted at most once.
    """
    if paraphraser is None:
        paraphraser = SynonymParaphraser()
    rng = rng_for(config.seed, "noise")

    eligible = [
        (r, a)
        for r in range(table.n_rows)
        if r not in exempt_rows
        for a in range(table.n_attrs)
        if not table.rows[r][a].is_null
    ]
    se_frac, te_frac = config.fractions()
    n_se = round(len(eligible) * se_frac)
    n_te = round(len(eligible) * te_frac)

    order = [eligible[i] for i in rng.permutation(len(eligible))] if eligible else []
    changes: dict[tuple[int, int], tuple[Value, str]] = {}

    text_kinds = sorted(CHAR_TEXT_KINDS, key=lambda k: k.name)
    digit_kinds = sorted(CHAR_DIGIT_KINDS, key=lambda k: k.name)

    done_se = 0
    for r, a in order:
        if done_se >= n_se:
            break
        cell = table.rows[r][a]
        if not cell.is_text:
            continue
        new_text = paraphraser.paraphrase(cell.text, rng)
        if new_text == cell.text:
            continue
        changes[(r, a)] = (Value.text_of(new_text), "paraphrase")
        done_se += 1

    done_te = 0
    for r, a in order:
        if done_te >= n_te:
            break
        if (r, a) in changes:
            continue
        cell = table.rows[r][a]
        kinds = text_kinds if cell.is_text else digit_kinds
        kind_order = [kinds[i] for i in rng.permutation(len(kinds))]
        for kind in kind_order:
            try:
                new_val = perturb_char(cell, kind, rng)
            except InapplicableKind:
                continue
            if new_val.text == cell.text:
                continue
            changes[(r, a)] = (new_val, kind.name.lower())
            done_te += 1
            break

    if done_se < n_se or done_te < n_te:
        warnings.warn(
            f"noise quotas unmet: semantic {done_se}/{n_se}, "
            f"typographic {done_te}/{n_te}",
            stacklevel=2,
        )

    if not changes:
        return table, ()

    new_rows = []
    for r in range(table.n_rows):
        row = list(table.rows[r])
        for a in range(table.n_attrs):
            hit = changes.get((r, a))
            if hit is not None:
                row[a] = hit[0]
        new_rows.append(tuple(row))
    dirty = table.replace_rows(new_rows, table.provenance)

    log = tuple(
        NoiseEntry(
            row=r,
            attr=table.attributes[a],
            original=table.rows[r][a].text,
            new=changes[(r, a)][0].text,
            kind=changes[(r, a)][1],
        )
        for r, a in sorted(changes)
    )
    return dirty, log


# ---------------------------------------------------------------------------
# Conflict generation


def generate_conflicts(
    table: Table,
    partition: Partition,
    n_sources: int = 12,
    seed: int = 0,
) -> tuple[Table, ConflictTruth]:
    """Append conflicting near-duplicates for every eligible entity set.

    Each source s gets a hidden reliability r_s ~ U[0.3, 0.8], drawn once
    and shared across all sets so it is estimable from agreement patterns.
    For each set with a usable textual attribute (non-Null in some member,
    at least two recurring values in its column), 3-5 copies of one member
    are appended, each attributed to a distinct source; a source keeps the
    true value w.p. r_s and otherwise claims a different recurring value
    from the column's pool. Sets with no usable attribute are skipped and
    counted.
    """
    if n_sources < 5:
        raise ValueError(f"need at least 5 sources to fill a conflict set, got {n_sources}")
    if partition.n != table.n_rows:
        raise ValueError("partition size does not match table")
    rng = rng_for(seed, "conflicts")

    reliability = tuple(
        (CONFLICT_SOURCE_BASE + s, float(rng.uniform(0.3, 0.8))) for s in range(n_sources)
    )
    rel_of = {src: r for src, r in reliability}

    # Recurring non-Null texts per textual column (seen at least twice), in
    # first-seen order: wrong claims should be plausible domain values, not
    # one-off typo artifacts the input noise may have left behind. A column
    # is conflict-worthy only when a wrong answer exists.
    pools: list[tuple[str, ...]] = []
    pool_values: list[dict[str, Value]] = []
    for a in range(table.n_attrs):
        seen: dict[str, Value] = {}
        counts: Counter[str] = Counter()
        for r in range(table.n_rows):
            v = table.rows[r][a]
            if v.is_text:
                counts[v.text] += 1
                if v.text not in seen:
                    seen[v.text] = v
        kept = {t: v for t, v in seen.items() if counts[t] >= 2}
        pools.append(tuple(kept))
        pool_values.append(kept)

    new_rows: list[tuple[Value, ...]] = []
    new_prov: list[int] = []
    sets_out: list[ConflictSet] = []
    skipped = 0
    next_id = table.n_rows

    for set_id, members in enumerate(partition.sets):
        candidates = [
            (m, a)
            for m in members
            for a in range(table.n_attrs)
            if table.rows[m][a].is_text and len(pools[a]) >= 2
        ]
        if not candidates:
            skipped += 1
            continue
        template, attr = candidates[int(rng.integers(len(candidates)))]
        truth = table.rows[template][attr].text
        c = int(rng.integers(3, 6))
        sources = sorted(int(s) for s in rng.choice(n_sources, size=c, replace=False))

        rows: list[tuple[int, int]] = []
        for s in sources:
            src = CONFLICT_SOURCE_BASE + s
            cells = list(table.rows[template])
            if rng.random() >= rel_of[src]:
                wrong = [t for t in pools[attr] if t != truth]
                pick = wrong[int(rng.integers(len(wrong)))]
                cells[attr] = pool_values[attr][pick]
            new_rows.append(tuple(cells))
            new_prov.append(src)
            rows.append((next_id, src))
            next_id += 1
        sets_out.append(
            ConflictSet(set_id=set_id, target_attr=attr, truth=truth, rows=tuple(rows))
        )

    if skipped:
        warnings.warn(f"{skipped} entity sets had no conflict-worthy attribute", stacklevel=2)

    out = Table(
        table.attributes,
        table.rows + tuple(new_rows),
        table.provenance + tuple(new_prov),
    )
    return out, ConflictTruth(sets=tuple(sets_out), reliability=reliability, skipped=skipped)


def extend_ground_truth(gt: GroundTruth, conflicts: ConflictTruth, n_total: int) -> GroundTruth:
    """Fold appended conflict rows into pairs and partition.

    Each conflict row is integrable with every member of its entity set and
    with its sibling conflict rows; set order is preserved because appended
    ids are larger than every original member.
    """
    sets = [list(s) for s in gt.partition.sets]
    pairs = set(gt.pairs)
    for cs in conflicts.sets:
        members = sets[cs.set_id]
        added = [rid for rid, _ in cs.rows]
        for rid in added:
            for m in members:
                pairs.add((min(rid, m), max(rid, m)))
            members.append(rid)
    partition = Partition.from_sets(n_total, [tuple(s) for s in sets])
    return GroundTruth(n=n_total, pairs=frozenset(pairs), partition=partition, conflicts=conflicts)


# ---------------------------------------------------------------------------
# End-to-end generation and bundle I/O


@dataclass(frozen=True)
class BenchParams:
    """Everything that determines a benchmark bundle, seed included."""

    entities: int = 200
    tables: int = 3
    attrs_per_table: int = 6
    overlap: int = 3
    drop_prob: float = 0.2
    missing_prob: float = 0.15
    noise_rate: float = _DEFAULT_MIX_RATE
    noise_mix: str = "balanced"
    conflict_sources: int = 12
    conflicts_before_noise: bool = False
    key_attrs: tuple[str, ...] = (_KEY_ATTR,)
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "entities": self.entities,
            "tables": self.tables,
            "attrs_per_table": self.attrs_per_table,
            "overlap": self.overlap,
            "drop_prob": self.drop_prob,
            "missing_prob": self.missing_prob,
            "noise_rate": self.noise_rate,
            "noise_mix": self.noise_mix,
            "conflict_sources": self.conflict_sources,
            "conflicts_before_noise": self.conflicts_before_noise,
            "key_attrs": list(self.key_attrs),
            "seed": self.seed,
        }

    @staticmethod
    def from_json(obj: Mapping) -> "BenchParams":
        return BenchParams(
            entities=int(obj["entities"]),
            tables=int(obj["tables"]),
            attrs_per_table=int(obj["attrs_per_table"]),
            overlap=int(obj["overlap"]),
            drop_prob=float(obj["drop_prob"]),
            missing_prob=float(obj["missing_prob"]),
            noise_rate=float(obj["noise_rate"]),
            noise_mix=str(obj["noise_mix"]),
            conflict_sources=int(obj["conflict_sources"]),
            conflicts_before_noise=bool(obj["conflicts_before_noise"]),
            key_attrs=tuple(str(a) for a in obj["key_attrs"]),
            seed=int(obj["seed"]),
        )


@dataclass(frozen=True)
class Bundle:
    """A generated benchmark: inputs, the dirty union, and its ground truth."""

    params: BenchParams
    inputs: tuple[Table, ...]
    dirty: Table
    truth: GroundTruth
    noise_log: tuple[NoiseEntry, ...] = field(default=())


def generate(params: BenchParams) -> Bundle:
    """Run the full benchmark pipeline for one parameter set."""
    clean = synth_clean(
        entities=params.entities,
        tables=params.tables,
        attrs_per_table=params.attrs_per_table,
        overlap=params.overlap,
        drop_prob=params.drop_prob,
        missing_prob=params.missing_prob,
        seed=params.seed,
    )
    union = outer_union(clean)
    gt = build_ground_truth(union, params.key_attrs)
    union = union.drop_attributes((ENTITY_ATTR,))
    inputs = tuple(t.drop_attributes((ENTITY_ATTR,)) for t in clean)

    noise_cfg = NoiseConfig(rate=params.noise_rate, mix=params.noise_mix, seed=params.seed)
    if params.conflicts_before_noise:
        with_conflicts, ctruth = generate_conflicts(
            union, gt.partition, n_sources=params.conflict_sources, seed=params.seed
        )
        gt = extend_ground_truth(gt, ctruth, with_conflicts.n_rows)
        exempt = frozenset(range(union.n_rows, with_conflicts.n_rows))
        dirty, log = inject_noise(with_conflicts, noise_cfg, exempt_rows=exempt)
    else:
        noised, log = inject_noise(union, noise_cfg)
        dirty, ctruth = generate_conflicts(
            noised, gt.partition, n_sources=params.conflict_sources, seed=params.seed
        )
        gt = extend_ground_truth(gt, ctruth, dirty.n_rows)

    return Bundle(params=params, inputs=inputs, dirty=dirty, truth=gt, noise_log=log)


def _dump(obj: dict, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")


def _truth_to_json(gt: GroundTruth) -> dict:
    obj: dict = {
        "n": gt.n,
        "pairs": [list(p) for p in sorted(gt.pairs)],
        "partition": {"n": gt.partition.n, "sets": [list(s) for s in gt.partition.sets]},
    }
    if gt.conflicts is not None:
        obj["conflicts"] = {
            "sets": [
                {
                    "set_id": cs.set_id,
                    "target_attr": cs.target_attr,
                    "truth": cs.truth,
                    "rows": [list(r) for r in cs.rows],
                }
                for cs in gt.conflicts.sets
            ],
            "reliability": {str(src): r for src, r in gt.conflicts.reliability},
            "skipped": gt.conflicts.skipped,
        }
    return obj


def _truth_from_json(obj: Mapping) -> GroundTruth:
    conflicts = None
    if "conflicts" in obj:
        c = obj["conflicts"]
        conflicts = ConflictTruth(
            sets=tuple(
                ConflictSet(
                    set_id=int(cs["set_id"]),
                    target_attr=int(cs["target_attr"]),
                    truth=str(cs["truth"]),
                    rows=tuple((int(r), int(s)) for r, s in cs["rows"]),
                )
                for cs in c["sets"]
            ),
            reliability=tuple(
                (int(src), float(r)) for src, r in sorted(c["reliability"].items(), key=lambda kv: int(kv[0]))
            ),
            skipped=int(c["skipped"]),
        )
    partition = Partition.from_sets(
        int(obj["partition"]["n"]), [tuple(s) for s in obj["partition"]["sets"]]
    )
    return GroundTruth(
        n=int(obj["n"]),
        pairs=frozenset((int(a), int(b)) for a, b in obj["pairs"]),
        partition=partition,
        conflicts=conflicts,
    )


def write_bundle(bundle: Bundle, out_dir: str | Path) -> None:
    """Write a benchmark bundle as CSVs plus JSON truth, log, and manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, t in enumerate(bundle.inputs):
        write_csv(t, out / f"table_{i}.csv")
    write_csv(bundle.dirty, out / "dirty.csv")
    _dump(_truth_to_json(bundle.truth), out / "ground_truth.json")
    _dump({"entries": [e.to_json() for e in bundle.noise_log]}, out / "noise_log.json")
    _dump(
        {
            "format": "lakemerge-bench",
            "version": 1,
            "params": bundle.params.to_json(),
            "provenance": list(bundle.dirty.provenance),
        },
        out / "manifest.json",
    )


def load_bundle(bundle_dir: str | Path) -> Bundle:
    """Load a bundle written by `write_bundle`, provenance included."""
    d = Path(bundle_dir)
    manifest = json.loads((d / "manifest.json").read_text())
    if manifest.get("format") != "lakemerge-bench":
        raise ValueError(f"not a benchmark bundle: {d}")
    params = BenchParams.from_json(manifest["params"])
    inputs = tuple(read_csv(d / f"table_{i}.csv", source=i) for i in range(params.tables))
    dirty = read_csv(d / "dirty.csv")
    dirty = dirty.replace_rows(dirty.rows, [int(p) for p in manifest["provenance"]])
    truth = _truth_from_json(json.loads((d / "ground_truth.json").read_text()))
    log = tuple(
        NoiseEntry.from_json(e) for e in json.loads((d / "noise_log.json").read_text())["entries"]
    )
    return Bundle(params=params, inputs=inputs, dirty=dirty, truth=truth, noise_log=log)
