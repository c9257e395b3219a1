"""Metrics: pairwise F1, partition similarity, resolution accuracy.

Partition similarity scores a predicted partition against a reference one
by maximum-weight bipartite matching with Jaccard weights, normalized by
the larger set count so identical partitions score exactly 1.0. The raw
matched-weight sum is always reported alongside, so other normalization
conventions can be recovered from the same report.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from .bench import ConflictTruth
from .core import Table
from .discover import Partition
from .resolve import ResolvedTuple

__all__ = [
    "F1Report",
    "SimilarityReport",
    "UniverseMismatch",
    "build_report",
    "exact_match_pairs",
    "hungarian",
    "pairwise_f1",
    "partition_similarity",
    "render_text",
    "resolution_accuracy",
]


class UniverseMismatch(Exception):
    """The two partitions cover different universes."""


@dataclass(frozen=True)
class F1Report:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float

    def to_json(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass(frozen=True)
class SimilarityReport:
    """Matched (pred index, ref index, jaccard) triples and their score."""

    matching: tuple[tuple[int, int, float], ...]
    raw_sum: float
    normalized: float

    def __post_init__(self) -> None:
        left = [i for i, _, _ in self.matching]
        right = [j for _, j, _ in self.matching]
        if len(set(left)) != len(left) or len(set(right)) != len(right):
            raise ValueError("matching reuses a set on one side")
        if not 0.0 <= self.normalized <= 1.0 + 1e-12:
            raise ValueError(f"normalized similarity out of range: {self.normalized}")

    def to_json(self) -> dict:
        return {
            "matching": [[i, j, w] for i, j, w in self.matching],
            "raw_sum": self.raw_sum,
            "normalized": self.normalized,
        }


def _check_canonical(pairs: Iterable[tuple[int, int]], name: str) -> set[tuple[int, int]]:
    out = set(pairs)
    for a, b in out:
        if a >= b:
            raise ValueError(f"{name} pair ({a}, {b}) is not canonical (need a < b)")
    return out


def pairwise_f1(pred_pairs: Iterable[tuple[int, int]], truth_pairs: Iterable[tuple[int, int]]) -> F1Report:
    """Precision/recall/F1 over canonical (a < b) pair sets.

    Zero-denominator cases are defined as 0, so an empty prediction against
    a non-empty truth scores 0 across the board.
    """
    pred = _check_canonical(pred_pairs, "predicted")
    truth = _check_canonical(truth_pairs, "truth")
    tp = len(pred & truth)
    fp = len(pred - truth)
    fn = len(truth - pred)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return F1Report(tp=tp, fp=fp, fn=fn, precision=precision, recall=recall, f1=f1)


def hungarian(weights: np.ndarray) -> tuple[tuple[int, int], ...]:
    """Maximum-weight assignment on a rectangular matrix.

    The matrix is zero-padded to square, so leaving a row or column
    unmatched costs nothing; returned edges cover only real cells and are
    sorted by row index.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2:
        raise ValueError(f"weights must be 2-D, got shape {w.shape}")
    if w.size and (not np.all(np.isfinite(w)) or w.min() < 0.0):
        raise ValueError("weights must be finite and non-negative")
    n_r, n_s = w.shape
    if n_r == 0 or n_s == 0:
        return ()
    side = max(n_r, n_s)
    padded = np.zeros((side, side))
    padded[:n_r, :n_s] = w
    rows, cols = linear_sum_assignment(padded, maximize=True)
    return tuple(
        (int(i), int(j)) for i, j in zip(rows, cols) if i < n_r and j < n_s
    )


def partition_similarity(pred: Partition, ref: Partition) -> SimilarityReport:
    """Jaccard-weighted maximum matching between two partitions' sets.

    raw_sum adds the matched Jaccard weights; normalized divides by
    max(|pred|, |ref|). Zero-weight edges are dropped from the reported
    matching since matching two disjoint sets carries no information.
    """
    if pred.n != ref.n:
        raise UniverseMismatch(f"partitions cover {pred.n} vs {ref.n} rows")
    r_sets = [frozenset(s) for s in pred.sets]
    s_sets = [frozenset(s) for s in ref.sets]
    w = np.zeros((len(r_sets), len(s_sets)))
    for i, a in enumerate(r_sets):
        for j, b in enumerate(s_sets):
            inter = len(a & b)
            if inter:
                w[i, j] = inter / len(a | b)
    edges = hungarian(w)
    matching = tuple((i, j, float(w[i, j])) for i, j in edges if w[i, j] > 0.0)
    raw = float(sum(wt for _, _, wt in matching))
    denom = max(len(r_sets), len(s_sets))
    return SimilarityReport(
        matching=matching, raw_sum=raw, normalized=raw / denom if denom else 1.0
    )


def resolution_accuracy(
    resolved: Mapping[int, ResolvedTuple], truth: ConflictTruth
) -> float:
    """Fraction of conflict attributes filled with the exact true value.

    Only the injected conflict attributes count; with none to score the
    accuracy is vacuously 1.0. Comparison is exact string match on
    canonical forms, so a Null or off-by-format answer is wrong.
    """
    if not truth.sets:
        return 1.0
    correct = 0
    for cs in truth.sets:
        if cs.set_id not in resolved:
            raise ValueError(f"no resolved tuple for conflict set {cs.set_id}")
        cell = resolved[cs.set_id].cells[cs.target_attr]
        if not cell.is_null and cell.text == cs.truth:
            correct += 1
    return correct / len(truth.sets)


def align_resolved(
    resolved: Iterable[ResolvedTuple],
    partition: Partition,
    truth: ConflictTruth,
) -> dict[int, ResolvedTuple]:
    """Map each injected conflict set onto a discovered set's resolution.

    Discovered partitions need not match the truth's set ids, so each
    conflict set is scored against the resolved tuple of whichever
    discovered set captured most of its conflict rows (lowest index on
    ties). Discovery errors that scatter a conflict's rows therefore show
    up as resolution mistakes, which is the end-to-end reading we want.
    """
    resolved = list(resolved)
    if len(resolved) != len(partition.sets):
        raise ValueError(
            f"{len(resolved)} resolved tuples for {len(partition.sets)} sets"
        )
    labels = partition.labels()
    aligned: dict[int, ResolvedTuple] = {}
    for cs in truth.sets:
        counts: dict[int, int] = {}
        for rid, _src in cs.rows:
            if not 0 <= rid < partition.n:
                raise ValueError(f"conflict row {rid} outside partition universe")
            counts[labels[rid]] = counts.get(labels[rid], 0) + 1
        best = max(counts.values())
        winner = min(s for s, c in counts.items() if c == best)
        aligned[cs.set_id] = resolved[winner]
    return aligned


def exact_match_pairs(table: Table) -> set[tuple[int, int]]:
    """Agreement baseline: pair rows that agree on every shared attribute.

    Two rows pair when they share at least one non-Null attribute and no
    shared attribute disagrees. Runs vectorized over row chunks so the
    quadratic scan stays cheap at benchmark scale.
    """
    n, m = table.n_rows, table.n_attrs
    if n < 2:
        return set()
    ids = np.zeros((n, m), dtype=np.int64)
    seen: dict[tuple[str, str], int] = {}
    for r in range(n):
        for a in range(m):
            v = table.rows[r][a]
            if v.is_null:
                continue
            key = (v.kind, v.text)
            if key not in seen:
                seen[key] = len(seen) + 1
            ids[r, a] = seen[key]
    present = ids != 0

    pairs: set[tuple[int, int]] = set()
    chunk = max(1, 2_000_000 // max(n * m, 1))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        both = present[lo:hi, None, :] & present[None, :, :]
        eq = ids[lo:hi, None, :] == ids[None, :, :]
        conflict = (both & ~eq).any(axis=2)
        share = (both & eq).any(axis=2)
        ok = share & ~conflict
        for i, j in zip(*np.nonzero(ok)):
            a, b = lo + int(i), int(j)
            if a < b:
                pairs.add((a, b))
    return pairs


# ---------------------------------------------------------------------------
# Report assembly


def build_report(
    f1: F1Report,
    similarity: SimilarityReport,
    accuracy: float | None,
    config: Mapping | None = None,
) -> dict:
    """Bundle the three metrics plus a config echo into one JSON object."""
    obj: dict = {
        "f1": f1.to_json(),
        "similarity": similarity.to_json(),
        "accuracy": accuracy,
    }
    if config is not None:
        obj["config"] = dict(config)
    return obj


def render_text(report: Mapping) -> str:
    """Render a report as an aligned two-column text table."""
    f1 = report["f1"]
    sim = report["similarity"]
    rows = [
        ("pairs tp/fp/fn", f"{f1['tp']}/{f1['fp']}/{f1['fn']}"),
        ("precision", f"{f1['precision']:.4f}"),
        ("recall", f"{f1['recall']:.4f}"),
        ("f1", f"{f1['f1']:.4f}"),
        ("similarity raw", f"{sim['raw_sum']:.4f}"),
        ("similarity", f"{sim['normalized']:.4f}"),
    ]
    acc = report.get("accuracy")
    rows.append(("accuracy", "n/a" if acc is None else f"{acc:.4f}"))
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)
