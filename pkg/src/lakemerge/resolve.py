"""Attribute triage and conflict resolution for integrable sets.

Per attribute a set is Missing (all Null), Unique (one distinct value), or
Multiple (a real conflict). Conflicts go to a resolver: uniform random,
majority vote, reliability-weighted vote over source accuracies, or an
in-context LLM call built from mutual-information-compressed demonstration
tuples (fill-in-the-blank template, answer chosen from the candidate set).
"""

from __future__ import annotations

import json
import math
import os
import re
import time
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .core import NULL, Table, Value
from .embed import EmbeddingCache, TableEmbedding

__all__ = [
    "EmptyOverlap",
    "SingleSource",
    "QuestionTooLarge",
    "NoContext",
    "LlmError",
    "AttributeStatus",
    "ResolvedTuple",
    "MITable",
    "LlmClient",
    "MockLlmClient",
    "HttpLlmClient",
    "triage_attribute",
    "mutual_information",
    "discretize_column",
    "mi_table",
    "compress_demo",
    "collate_tuple",
    "select_demos",
    "build_prompt",
    "estimate_token_count",
    "estimate_source_reliability",
    "conflict_claims",
    "conflict_pool_sizes",
    "column_pool_sizes",
    "ResolverContext",
    "resolve_set",
    "resolve_all",
    "save_resolved",
    "load_resolved",
]

RESOLVERS = ("random", "majority", "reliability", "iclcr")
DEMO_STRATEGIES = ("random", "knn", "weighted_knn")
TOKEN_ENV_VAR = "LAKEMERGE_LLM_TOKEN"
_BLANK = "____"


class EmptyOverlap(Exception):
    """No rows where both columns are observed."""


class SingleSource(Exception):
    """Reliability estimation needs at least two sources."""


class QuestionTooLarge(Exception):
    """The question alone exceeds the token budget."""


class NoContext(Exception):
    """The tuple has no non-Null attribute besides the target."""


class LlmError(Exception):
    """The client could not produce a usable answer."""


@dataclass(frozen=True)
class AttributeStatus:
    kind: str  # missing | unique | multiple
    value: Value | None = None
    candidates: tuple[tuple[Value, int], ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "unique" and self.value is None:
            raise ValueError("unique status needs its value")
        if self.kind == "multiple" and len(self.candidates) < 2:
            raise ValueError("multiple status needs >= 2 distinct candidates")


@dataclass(frozen=True)
class ResolvedTuple:
    cells: tuple[Value, ...]
    provenance: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.cells) != len(self.provenance):
            raise ValueError("provenance must align with cells")


def triage_attribute(rows: Sequence[Sequence[Value]], a: int) -> AttributeStatus:
    """Three-way split; candidate distinctness is exact equality of the
    canonical text."""
    if not rows:
        raise ValueError("empty set")
    order: list[str] = []
    counts: Counter[str] = Counter()
    first: dict[str, Value] = {}
    for row in rows:
        cell = row[a]
        if cell.is_null:
            continue
        if cell.text not in counts:
            order.append(cell.text)
            first[cell.text] = cell
        counts[cell.text] += 1
    if not order:
        return AttributeStatus("missing")
    if len(order) == 1:
        return AttributeStatus("unique", value=first[order[0]])
    return AttributeStatus(
        "multiple", candidates=tuple((first[t], counts[t]) for t in order)
    )


def mutual_information(xs: Sequence, ys: Sequence) -> float:
    """Plug-in MI in bits over paired symbols; None marks a missing side and
    the row is dropped."""
    if len(xs) != len(ys):
        raise ValueError("columns must align")
    pairs = [(x, y) for x, y in zip(xs, ys) if x is not None and y is not None]
    if not pairs:
        raise EmptyOverlap("no co-observed rows")
    n = len(pairs)
    joint = Counter(pairs)
    px = Counter(x for x, _ in pairs)
    py = Counter(y for _, y in pairs)
    mi = 0.0
    for (x, y), c in joint.items():
        p = c / n
        mi += p * math.log2(p * n * n / (px[x] * py[y]))
    return mi


def discretize_column(cells: Sequence[Value], bins: int = 10) -> list:
    """Symbols for MI: canonical text for categorical columns, equal-width
    bin indices over the observed range when every non-Null cell is numeric;
    None for Null."""
    observed = [c for c in cells if not c.is_null]
    if observed and all(c.is_number for c in observed):
        values = [float(c.text) for c in observed]
        lo, hi = min(values), max(values)
        out = []
        for c in cells:
            if c.is_null:
                out.append(None)
            elif hi == lo:
                out.append(0)
            else:
                idx = int((float(c.text) - lo) * bins / (hi - lo))
                out.append(min(idx, bins - 1))
        return out
    return [None if c.is_null else c.text for c in cells]


@dataclass(frozen=True)
class MITable:
    """Pairwise mutual information in bits; the diagonal is the entropy."""

    m: int
    mi: np.ndarray  # (m, m)
    entropy: np.ndarray  # (m,)
    bins: int

    def get(self, a: int, b: int) -> float:
        return float(self.mi[a, b])


def mi_table(table: Table, bins: int = 10) -> MITable:
    m = table.n_attrs
    symbols = [discretize_column(table.column(a), bins) for a in range(m)]
    mi = np.zeros((m, m))
    for a in range(m):
        for b in range(a, m):
            try:
                mi[a, b] = mi[b, a] = mutual_information(symbols[a], symbols[b])
            except EmptyOverlap:
                mi[a, b] = mi[b, a] = 0.0
    return MITable(m=m, mi=mi, entropy=mi.diagonal().copy(), bins=bins)


def compress_demo(
    cells: Sequence[Value], target_attr: int, mi: MITable, beta: float = 0.1
) -> list[int]:
    """Indices of context attributes kept for the prompt: non-Null, not the
    target, MI against the target >= beta; when nothing clears the bar the
    single highest-MI attribute stays so the demonstration is never empty."""
    eligible = [
        a for a in range(len(cells)) if a != target_attr and not cells[a].is_null
    ]
    if not eligible:
        raise NoContext(f"no usable context for attribute {target_attr}")
    kept = [a for a in eligible if mi.get(a, target_attr) >= beta]
    if not kept:
        kept = [max(eligible, key=lambda a: (mi.get(a, target_attr), -a))]
    return kept


def collate_tuple(rows: Sequence[Sequence[Value]], mode: str = "firstseen") -> tuple[Value, ...]:
    """Provisional merged tuple for a set: per attribute, either the distinct
    values concatenated in first-seen order or the majority value."""
    if mode not in ("firstseen", "majority"):
        raise ValueError(f"unknown collate mode {mode!r}")
    m = len(rows[0])
    cells: list[Value] = []
    for a in range(m):
        status = triage_attribute(rows, a)
        if status.kind == "missing":
            cells.append(NULL)
        elif status.kind == "unique":
            cells.append(status.value)
        elif mode == "firstseen":
            cells.append(Value.text_of(" ".join(v.text for v, _c in status.candidates)))
        else:
            top = max(c for _v, c in status.candidates)
            text = min(v.text for v, c in status.candidates if c == top)
            cells.append(next(v for v, _c in status.candidates if v.text == text))
    return tuple(cells)


def _weighted_summary(
    vecs: np.ndarray, unmasked: Sequence[bool], weights: np.ndarray | None
) -> np.ndarray:
    """Mean (or weight-renormalized mean) of the unmasked attribute vectors."""
    idx = [i for i, u in enumerate(unmasked) if u]
    if not idx:
        return np.zeros(vecs.shape[1])
    if weights is None:
        return vecs[idx].mean(axis=0)
    w = weights[idx]
    total = w.sum()
    if total <= 0.0:
        return vecs[idx].mean(axis=0)
    return (vecs[idx] * (w / total)[:, None]).sum(axis=0)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def select_demos(
    strategy: str,
    table: Table,
    embeddings: TableEmbedding | None,
    members: Sequence[int],
    target_attr: int,
    k: int,
    mi: MITable | None = None,
    rng: np.random.Generator | None = None,
    cache: EmbeddingCache | None = None,
    tnew_mode: str = "firstseen",
) -> list[int]:
    """Demonstration rows: non-Null target, at least one other non-Null
    attribute, not in the set being resolved. Returns fewer than k when
    candidates are scarce."""
    if strategy not in DEMO_STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    member_set = set(members)
    candidates = []
    for r in range(table.n_rows):
        if r in member_set:
            continue
        cells = table.rows[r]
        if cells[target_attr].is_null:
            continue
        if all(c.is_null for i, c in enumerate(cells) if i != target_attr):
            continue
        candidates.append(r)
    if k <= 0 or not candidates:
        return []
    if strategy == "random":
        if rng is None:
            raise ValueError("random strategy needs an rng")
        pick = rng.choice(len(candidates), size=min(k, len(candidates)), replace=False)
        return [candidates[int(i)] for i in pick]

    if embeddings is None or cache is None:
        raise ValueError(f"{strategy} needs embeddings and a cache")
    m = table.n_attrs
    weights = None
    if strategy == "weighted_knn":
        if mi is None:
            raise ValueError("weighted_knn needs an MI table")
        raw = np.array(
            [0.0 if a == target_attr else max(mi.get(a, target_attr), 0.0) for a in range(m)]
        )
        weights = raw / raw.sum() if raw.sum() > 0 else raw

    tnew = collate_tuple([table.rows[r] for r in sorted(member_set)], mode=tnew_mode)
    q_vecs = np.stack(
        [cache.vector(c.text) if not c.is_null else cache.provider.null_vector() for c in tnew]
    )
    q_unmasked = [not c.is_null for c in tnew]
    if strategy == "weighted_knn":
        q_unmasked = [u and a != target_attr for a, u in enumerate(q_unmasked)]
    query = _weighted_summary(q_vecs, q_unmasked, weights)

    scored = []
    for r in candidates:
        unmasked = [bool(b) for b in embeddings.mask_bits[r]]
        if strategy == "weighted_knn":
            unmasked = [u and a != target_attr for a, u in enumerate(unmasked)]
        vec = _weighted_summary(embeddings.vecs[r], unmasked, weights)
        scored.append((-_cosine(query, vec), r))
    scored.sort()
    return [r for _s, r in scored[:k]]


def _sentence(pairs: Sequence[tuple[str, str]], target: str, answer: str) -> str:
    clauses = []
    for i, (name, value) in enumerate(pairs):
        lead = "the values of an attribute" if i == 0 else "the attribute"
        clauses.append(f"{lead} {name} is {value}")
    joined = ", ".join(clauses)
    return (
        f"For a tuple, if {joined}, respectively, "
        f"then the value of the attribute {target} should be {answer}."
    )


def estimate_token_count(text: str) -> int:
    return (len(text) + 3) // 4


def build_prompt(
    demos: Sequence[tuple[Sequence[tuple[str, str]], str]],
    question: Sequence[tuple[str, str]],
    target_name: str,
    token_budget: int = 3000,
) -> str:
    """Fill-in-the-blank prompt: one sentence per demonstration, then the
    question with the answer slot blank. Trailing demos are dropped first to
    fit the budget; the question never is."""
    q_line = _sentence(question, target_name, _BLANK)
    if estimate_token_count(q_line) > token_budget:
        raise QuestionTooLarge(
            f"question needs {estimate_token_count(q_line)} tokens, budget {token_budget}"
        )
    lines = [_sentence(pairs, target_name, answer) for pairs, answer in demos]
    while lines and estimate_token_count("\n".join(lines + [q_line])) > token_budget:
        lines.pop()
    return "\n".join(lines + [q_line])


class LlmClient(Protocol):
    def choose(self, prompt: str, candidates: Sequence[str]) -> int: ...


class MockLlmClient:
    """Deterministic stand-in: votes with the demonstration answers embedded
    in the prompt; highest frequency wins, lowest index breaks ties, index 0
    when no demo answer matches a candidate."""

    def choose(self, prompt: str, candidates: Sequence[str]) -> int:
        if not candidates:
            raise LlmError("no candidates")
        answers = [
            a for a in re.findall(r"should be ([^.\n]+)\.", prompt) if a != _BLANK
        ]
        counts = Counter(answers)
        best, best_count = 0, 0
        for i, cand in enumerate(candidates):
            if counts.get(cand, 0) > best_count:
                best, best_count = i, counts[cand]
        return best


class HttpLlmClient:
    """Chat-completion client asking for the index of the best candidate.

    Sends {model, messages, temperature: 0}; the reply must contain an
    integer index. Unparsable or failed replies are retried (three attempts
    total) before LlmError. Auth token comes from the environment only.
    """

    def __init__(
        self,
        url: str,
        model: str,
        timeout: float = 30.0,
        attempts: int = 3,
        backoff: float = 0.5,
    ):
        import requests

        self.url = url
        self.model = model
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff
        self._session = requests.Session()
        token = os.environ.get(TOKEN_ENV_VAR)
        if token:
            self._session.headers["Authorization"] = f"Bearer {token}"

    def choose(self, prompt: str, candidates: Sequence[str]) -> int:
        if not candidates:
            raise LlmError("no candidates")
        listing = "\n".join(f"{i}: {c}" for i, c in enumerate(candidates))
        content = (
            f"{prompt}\n\nCandidates:\n{listing}\n"
            "Reply with only the integer index of the best candidate."
        )
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": 0,
        }
        last = "no attempt made"
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                resp = self._session.post(self.url, json=body, timeout=self.timeout)
                resp.raise_for_status()
                text = resp.json()["choices"][0]["message"]["content"]
            except Exception as exc:  # noqa: BLE001 - every failure is retryable
                last = f"request failed: {exc}"
                continue
            found = re.search(r"-?\d+", str(text))
            if found:
                idx = int(found.group())
                if 0 <= idx < len(candidates):
                    return idx
            last = f"unparsable reply: {text!r}"
        raise LlmError(last)


_ACC_FLOOR, _ACC_CEIL = 0.05, 0.95


def _log_odds(acc: float) -> float:
    a = min(max(acc, _ACC_FLOOR), _ACC_CEIL)
    return math.log(a / (1.0 - a))


def _claim_weight(acc: float, pool: int) -> float:
    """Vote weight of one claim under a uniform-error model: the source's
    log-odds of being right plus ln(pool - 1) for the wrong alternatives it
    did not pick. Binary pools reduce to plain log-odds; larger pools make
    agreement stronger evidence, since wrong sources rarely collide."""
    return _log_odds(acc) + math.log(max(pool - 1, 1))


def estimate_source_reliability(
    claims: Sequence[Sequence[tuple[int, str]]],
    pool_sizes: Sequence[int] | None = None,
    max_rounds: int = 100,
    tol: float = 1e-6,
) -> dict[int, float]:
    """Iterative truth discovery: weighted consensus per conflict, then each
    source's accuracy re-estimated as its Laplace-smoothed agreement rate;
    repeat to a fixpoint. pool_sizes, aligned with claims, gives the number
    of values a wrong claim could have drawn from; omitted means binary."""
    sources = sorted({s for conflict in claims for s, _v in conflict})
    if len(sources) < 2:
        raise SingleSource(f"need >= 2 sources, have {len(sources)}")
    sizes = [2] * len(claims) if pool_sizes is None else list(pool_sizes)
    if len(sizes) != len(claims):
        raise ValueError("pool_sizes must align with claims")
    acc = {s: 0.6 for s in sources}
    for _ in range(max_rounds):
        agree: Counter[int] = Counter()
        total: Counter[int] = Counter()
        for conflict, pool in zip(claims, sizes):
            votes: dict[str, float] = {}
            for s, v in conflict:
                votes[v] = votes.get(v, 0.0) + _claim_weight(acc[s], pool)
            top = max(votes.values())
            consensus = min(v for v, w in votes.items() if w == top)
            for s, v in conflict:
                total[s] += 1
                if v == consensus:
                    agree[s] += 1
        new_acc = {
            s: (agree[s] + 1.0) / (total[s] + 2.0) if total[s] else acc[s]
            for s in sources
        }
        delta = max(abs(new_acc[s] - acc[s]) for s in sources)
        acc = new_acc
        if delta < tol:
            break
    return acc


@dataclass
class ResolverContext:
    table: Table
    rng: np.random.Generator
    embeddings: TableEmbedding | None = None
    cache: EmbeddingCache | None = None
    mi: MITable | None = None
    client: LlmClient | None = None
    strategy: str = "weighted_knn"
    k: int = 10
    beta: float = 0.1
    token_budget: int = 3000
    tnew_mode: str = "firstseen"
    source_acc: dict[int, float] | None = None
    pool_sizes: tuple[int, ...] | None = None
    fallbacks: int = field(default=0, init=False)


def _majority(candidates: tuple[tuple[Value, int], ...]) -> Value:
    top = max(c for _v, c in candidates)
    text = min(v.text for v, c in candidates if c == top)
    return next(v for v, _c in candidates if v.text == text)


def _iclcr_choice(
    members: Sequence[int],
    target_attr: int,
    candidates: tuple[tuple[Value, int], ...],
    ctx: ResolverContext,
) -> Value:
    if ctx.client is None or ctx.mi is None:
        raise LlmError("iclcr needs a client and an MI table")
    rows = [ctx.table.rows[r] for r in sorted(members)]
    tnew = collate_tuple(rows, mode=ctx.tnew_mode)
    kept_q = compress_demo(tnew, target_attr, ctx.mi, ctx.beta)
    names = ctx.table.attributes
    question = [(names[a], tnew[a].text) for a in kept_q]
    demo_rows = select_demos(
        ctx.strategy,
        ctx.table,
        ctx.embeddings,
        members,
        target_attr,
        ctx.k,
        mi=ctx.mi,
        rng=ctx.rng,
        cache=ctx.cache,
        tnew_mode=ctx.tnew_mode,
    )
    demos = []
    for r in demo_rows:
        cells = ctx.table.rows[r]
        kept = compress_demo(cells, target_attr, ctx.mi, ctx.beta)
        demos.append(
            ([(names[a], cells[a].text) for a in kept], cells[target_attr].text)
        )
    prompt = build_prompt(demos, question, names[target_attr], ctx.token_budget)
    texts = [v.text for v, _c in candidates]
    idx = ctx.client.choose(prompt, texts)
    if not 0 <= idx < len(candidates):
        raise LlmError(f"candidate index {idx} out of range")
    return candidates[idx][0]


def resolve_set(members: Sequence[int], resolver: str, ctx: ResolverContext) -> ResolvedTuple:
    """Resolve one integrable set into a single tuple."""
    if resolver not in RESOLVERS:
        raise ValueError(f"unknown resolver {resolver!r}")
    ordered = sorted(members)
    rows = [ctx.table.rows[r] for r in ordered]
    cells: list[Value] = []
    provenance: list[str] = []
    for a in range(ctx.table.n_attrs):
        status = triage_attribute(rows, a)
        if status.kind == "missing":
            cells.append(NULL)
            provenance.append("missing")
            continue
        if status.kind == "unique":
            cells.append(status.value)
            provenance.append("unique")
            continue
        if resolver == "random":
            pick = int(ctx.rng.integers(0, len(status.candidates)))
            chosen = status.candidates[pick][0]
        elif resolver == "majority":
            chosen = _majority(status.candidates)
        elif resolver == "reliability":
            if ctx.pool_sizes is None:
                ctx.pool_sizes = column_pool_sizes(ctx.table)
            votes: dict[str, float] = {v.text: 0.0 for v, _c in status.candidates}
            for r in ordered:
                cell = ctx.table.rows[r][a]
                if not cell.is_null:
                    acc = (ctx.source_acc or {}).get(ctx.table.provenance[r], 0.6)
                    votes[cell.text] += _claim_weight(acc, ctx.pool_sizes[a])
            top = max(votes.values())
            text = min(t for t, w in votes.items() if w == top)
            chosen = next(v for v, _c in status.candidates if v.text == text)
        else:
            try:
                chosen = _iclcr_choice(members, a, status.candidates, ctx)
            except (LlmError, QuestionTooLarge, NoContext):
                ctx.fallbacks += 1
                chosen = _majority(status.candidates)
                cells.append(chosen)
                provenance.append("resolved:iclcr-fallback")
                continue
        cells.append(chosen)
        provenance.append(f"resolved:{resolver}")
    return ResolvedTuple(tuple(cells), tuple(provenance))


def column_pool_sizes(table: Table) -> tuple[int, ...]:
    """Distinct non-Null texts per column."""
    return tuple(
        len({row[a].text for row in table.rows if not row[a].is_null})
        for a in range(table.n_attrs)
    )


def _conflicts(table: Table, partition_sets: Sequence[Sequence[int]]):
    """Yield (attr, [(source, value), ...]) per conflicted attribute of each set."""
    for members in partition_sets:
        ordered = sorted(members)
        rows = [table.rows[r] for r in ordered]
        for a in range(table.n_attrs):
            status = triage_attribute(rows, a)
            if status.kind != "multiple":
                continue
            conflict = [
                (table.provenance[r], table.rows[r][a].text)
                for r in ordered
                if not table.rows[r][a].is_null
            ]
            yield a, conflict


def conflict_claims(table: Table, partition_sets: Sequence[Sequence[int]]) -> list[list[tuple[int, str]]]:
    """Per conflicted attribute of each set, the (source, value) claims."""
    return [conflict for _a, conflict in _conflicts(table, partition_sets)]


def conflict_pool_sizes(table: Table, partition_sets: Sequence[Sequence[int]]) -> list[int]:
    """Column value-pool size for each conflict, aligned with conflict_claims."""
    pools = column_pool_sizes(table)
    return [pools[a] for a, _conflict in _conflicts(table, partition_sets)]


def resolve_all(
    partition_sets: Sequence[Sequence[int]],
    resolver: str,
    ctx: ResolverContext,
) -> list[ResolvedTuple]:
    if resolver == "reliability" and ctx.source_acc is None:
        claims = conflict_claims(ctx.table, partition_sets)
        sizes = conflict_pool_sizes(ctx.table, partition_sets)
        try:
            ctx.source_acc = estimate_source_reliability(claims, sizes)
        except SingleSource:
            warnings.warn("single source; reliability degrades to majority", stacklevel=2)
            ctx.source_acc = {}
    return [resolve_set(members, resolver, ctx) for members in partition_sets]


def save_resolved(
    resolved: Sequence[ResolvedTuple],
    partition_sets: Sequence[Sequence[int]],
    path: str,
) -> None:
    doc = {
        "sets": [
            {
                "set_id": i,
                "members": sorted(members),
                "cells": [None if c.is_null else [c.kind, c.text] for c in r.cells],
                "provenance": list(r.provenance),
            }
            for i, (members, r) in enumerate(zip(partition_sets, resolved))
        ]
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_resolved(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)["sets"]
